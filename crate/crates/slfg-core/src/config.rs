//! Layered pipeline configuration with defaults matching the reference
//! setup: 10-second sampling, groups of 16, a 10% relative threshold, and a
//! 64-frame budget.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gateway::prompts::PromptPaths;
use crate::gateway::ModelEndpointConfig;
use crate::reorg::SelectionConfig;
use crate::sampling::SamplingConfig;

/// Remote endpoints for the four model roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointsConfig {
    pub describer: ModelEndpointConfig,
    pub abstractor: ModelEndpointConfig,
    pub embedder: ModelEndpointConfig,
    pub answerer: ModelEndpointConfig,
}

impl Default for EndpointsConfig {
    fn default() -> Self {
        let base = "http://localhost:8000/v1";
        Self {
            describer: ModelEndpointConfig::new(base, "llava-onevision-qwen2-7b-ov"),
            abstractor: ModelEndpointConfig::new(base, "Qwen2.5-7B-Instruct"),
            embedder: ModelEndpointConfig::new(base, "bge-m3"),
            answerer: ModelEndpointConfig::new(base, "llava-onevision-qwen2-7b-ov"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sampling: SamplingConfig,
    pub group_size: usize,
    pub selection: SelectionConfig,
    pub endpoints: EndpointsConfig,
    pub prompts: PromptPaths,
    pub index_root: PathBuf,
    pub frames_root: PathBuf,
    /// Video-level parallelism during evaluation.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampling: SamplingConfig::default(),
            group_size: 16,
            selection: SelectionConfig::default(),
            endpoints: EndpointsConfig::default(),
            prompts: PromptPaths::default(),
            index_root: PathBuf::from("index"),
            frames_root: PathBuf::from("frames"),
            jobs: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sampling.interval_ms == 0 {
            return Err(crate::error::Error::Config(
                "sampling interval must be positive".into(),
            ));
        }
        if self.group_size == 0 {
            return Err(crate::error::Error::Config(
                "group_size must be at least 1".into(),
            ));
        }
        if self.jobs == 0 {
            return Err(crate::error::Error::Config("jobs must be at least 1".into()));
        }
        self.selection.validate()?;
        self.endpoints.describer.validate()?;
        self.endpoints.abstractor.validate()?;
        self.endpoints.embedder.validate()?;
        self.endpoints.answerer.validate()?;
        Ok(())
    }
}

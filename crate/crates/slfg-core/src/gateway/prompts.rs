//! Prompt templates for the four model calls.
//!
//! Templates ship as editable text files; the copies under `prompts/` in the
//! crate are compiled in as defaults and any of them can be overridden by
//! path. Placeholders: the describe template takes `{timestamps}`, the answer
//! template takes `{question}` and `{options}`, the other two take none (their
//! content arrives as a separate message).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::AnswerOption;

const DESCRIBE_TEMPLATE: &str = include_str!("../../prompts/describe.txt");
const ABSTRACT_TEMPLATE: &str = include_str!("../../prompts/abstract.txt");
const QUERY_SCENE_TEMPLATE: &str = include_str!("../../prompts/query_scene.txt");
const ANSWER_TEMPLATE: &str = include_str!("../../prompts/answer.txt");

/// Optional template overrides, one path per call kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptPaths {
    pub describe: Option<PathBuf>,
    pub abstraction: Option<PathBuf>,
    pub query_scene: Option<PathBuf>,
    pub answer: Option<PathBuf>,
}

/// The loaded template set.
#[derive(Debug, Clone)]
pub struct PromptSet {
    describe: String,
    abstraction: String,
    query_scene: String,
    answer: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            describe: DESCRIBE_TEMPLATE.trim_end().to_string(),
            abstraction: ABSTRACT_TEMPLATE.trim_end().to_string(),
            query_scene: QUERY_SCENE_TEMPLATE.trim_end().to_string(),
            answer: ANSWER_TEMPLATE.trim_end().to_string(),
        }
    }

    pub fn load(paths: &PromptPaths) -> Result<Self> {
        let mut set = Self::builtin();
        let read = |path: &Option<PathBuf>, slot: &mut String| -> Result<()> {
            if let Some(p) = path {
                *slot = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("prompt template {}: {e}", p.display())))?
                    .trim_end()
                    .to_string();
            }
            Ok(())
        };
        read(&paths.describe, &mut set.describe)?;
        read(&paths.abstraction, &mut set.abstraction)?;
        read(&paths.query_scene, &mut set.query_scene)?;
        read(&paths.answer, &mut set.answer)?;
        Ok(set)
    }

    /// Describe prompt with the group's frame timestamps injected, anchoring
    /// the description temporally.
    pub fn describe_prompt(&self, timestamps_ms: &[u64]) -> String {
        let list = timestamps_ms
            .iter()
            .map(|&t| format_seconds(t))
            .collect::<Vec<_>>()
            .join(", ");
        self.describe.replace("{timestamps}", &list)
    }

    pub fn abstraction_prompt(&self) -> &str {
        &self.abstraction
    }

    pub fn query_scene_prompt(&self) -> &str {
        &self.query_scene
    }

    pub fn answer_prompt(&self, question: &str, options: &[AnswerOption]) -> String {
        let mut listing = String::new();
        for o in options {
            let _ = writeln!(listing, "{o}");
        }
        self.answer
            .replace("{question}", question)
            .replace("{options}", listing.trim_end())
    }
}

fn format_seconds(t_ms: u64) -> String {
    if t_ms.is_multiple_of(1000) {
        format!("{}", t_ms / 1000)
    } else {
        format!("{:.3}", t_ms as f64 / 1000.0)
    }
}

//! Layered configuration: built-in defaults, then the config file, then
//! SLFG_* environment variables, then command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use slfg_core::{PipelineConfig, SamplingConfig, SelectionStrategy};

use crate::Overrides;

pub fn resolve_config(overrides: &Overrides) -> Result<PipelineConfig> {
    let mut config = match config_path(overrides) {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    apply_env(&mut config)?;
    apply_flags(&mut config, overrides)?;
    config.validate()?;
    Ok(config)
}

fn config_path(overrides: &Overrides) -> Option<PathBuf> {
    overrides
        .config
        .clone()
        .or_else(|| env_var("SLFG_CONFIG").map(PathBuf::from))
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn env_parse<T: FromStr>(name: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match env_var(name) {
        None => Ok(None),
        Some(raw) => match raw.parse() {
            Ok(v) => Ok(Some(v)),
            Err(e) => bail!("invalid {name}={raw:?}: {e}"),
        },
    }
}

fn apply_env(config: &mut PipelineConfig) -> Result<()> {
    if let Some(interval_s) = env_parse::<f64>("SLFG_INTERVAL")? {
        config.sampling = SamplingConfig::from_seconds(interval_s, config.sampling.origin_s())?;
    }
    if let Some(v) = env_parse("SLFG_GROUP_SIZE")? {
        config.group_size = v;
    }
    if let Some(v) = env_parse("SLFG_THRESHOLD")? {
        config.selection.threshold = v;
    }
    if let Some(v) = env_parse::<SelectionStrategy>("SLFG_STRATEGY")? {
        config.selection.strategy = v;
    }
    if let Some(v) = env_parse("SLFG_MAX_FRAMES")? {
        config.selection.max_frames = v;
    }
    if let Some(v) = env_parse("SLFG_TOPN_N")? {
        config.selection.topn_n = v;
    }
    if let Some(v) = env_var("SLFG_INDEX_ROOT") {
        config.index_root = PathBuf::from(v);
    }
    if let Some(v) = env_var("SLFG_FRAMES_ROOT") {
        config.frames_root = PathBuf::from(v);
    }
    if let Some(v) = env_parse("SLFG_JOBS")? {
        config.jobs = v;
    }
    Ok(())
}

fn apply_flags(config: &mut PipelineConfig, overrides: &Overrides) -> Result<()> {
    if let Some(interval_s) = overrides.interval {
        config.sampling = SamplingConfig::from_seconds(interval_s, config.sampling.origin_s())?;
    }
    if let Some(v) = overrides.group_size {
        config.group_size = v;
    }
    if let Some(v) = overrides.threshold {
        config.selection.threshold = v;
    }
    if let Some(raw) = &overrides.strategy {
        config.selection.strategy = raw.parse()?;
    }
    if let Some(v) = overrides.max_frames {
        config.selection.max_frames = v;
    }
    if let Some(v) = overrides.topn_n {
        config.selection.topn_n = v;
    }
    if let Some(v) = &overrides.index_root {
        config.index_root = v.clone();
    }
    if let Some(v) = &overrides.frames_root {
        config.frames_root = v.clone();
    }
    if let Some(v) = overrides.jobs {
        config.jobs = v;
    }
    Ok(())
}

pub fn mock_fixtures_path(overrides: &Overrides) -> Option<PathBuf> {
    overrides
        .mock_fixtures
        .clone()
        .or_else(|| env_var("SLFG_MOCK_FIXTURES").map(PathBuf::from))
}

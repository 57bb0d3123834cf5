//! Error types shared across the pipeline.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The frame directory's manifest or files do not cover the sampling grid.
    #[error("frame directory {dir}: missing frames at t_ms {missing:?}")]
    MissingFrames { dir: PathBuf, missing: Vec<u64> },

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("external tool `{tool}` not found on PATH; install it or ingest from a pre-extracted frame directory")]
    ToolMissing { tool: String },

    #[error("frame extraction failed:\n{stderr}")]
    ExtractionFailed { stderr: String },

    #[error("backend unavailable after {attempts} attempt(s): {detail}")]
    BackendUnavailable { attempts: u32, detail: String },

    #[error("malformed backend response: {0}")]
    MalformedResponse(String),

    #[error("storage error at {path}: {source}")]
    Storage {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("corrupt index file {path}: {detail}")]
    CorruptIndex { path: PathBuf, detail: String },

    #[error("index file {path} has schema version {found}, newer than supported version {supported}")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("dataset {path} line {line}: {detail}")]
    Dataset {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    /// Wraps an error with the pipeline stage it occurred in.
    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn invalid_arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

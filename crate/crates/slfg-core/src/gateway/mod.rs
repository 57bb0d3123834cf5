//! Uniform access to the four model capabilities the pipeline needs:
//! vision description, scene abstraction, text embedding, and final
//! answering. Backends are either remote HTTP endpoints ([`http::HttpGateway`])
//! or fully deterministic mocks ([`mock::MockGateway`]) for offline tests.

pub mod http;
pub mod mock;
pub mod prompts;

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::ImageRef;

/// Connection settings for one remote model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the credential. The value is
    /// read at request time and never logged.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl Default for ModelEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".to_string(),
            model_name: String::new(),
            api_key_env: "SLFG_API_KEY".to_string(),
            timeout_s: 120.0,
            max_retries: 3,
            max_in_flight: 4,
        }
    }
}

impl ModelEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timeout_s.is_finite() || self.timeout_s <= 0.0 {
            return Err(Error::Config(format!(
                "endpoint timeout must be positive, got {}",
                self.timeout_s
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        if self.base_url.is_empty() {
            return Err(Error::Config("endpoint base_url is empty".into()));
        }
        Ok(())
    }
}

/// A fixed-length dense embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid_arg("embedding vector is empty"));
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Which model capability a call exercised. Query-scene extraction rides the
/// same text backend as abstraction but is tallied separately: abstraction
/// cost is per-video and amortizes, extraction cost is per-question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Describe,
    Abstract,
    Embed,
    Answer,
    Extract,
}

/// One recorded model call.
#[derive(Debug, Clone, Serialize)]
pub struct CallRecord {
    pub kind: CallKind,
    pub video_id: String,
    pub seconds: f64,
}

/// Per-kind call totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerCounts {
    pub describe_calls: usize,
    pub abstract_calls: usize,
    pub embed_calls: usize,
    pub answer_calls: usize,
    pub extract_calls: usize,
}

impl LedgerCounts {
    pub fn total(&self) -> usize {
        self.describe_calls
            + self.abstract_calls
            + self.embed_calls
            + self.answer_calls
            + self.extract_calls
    }

    /// Counts accumulated since an earlier snapshot.
    pub fn since(&self, earlier: &LedgerCounts) -> LedgerCounts {
        LedgerCounts {
            describe_calls: self.describe_calls - earlier.describe_calls,
            abstract_calls: self.abstract_calls - earlier.abstract_calls,
            embed_calls: self.embed_calls - earlier.embed_calls,
            answer_calls: self.answer_calls - earlier.answer_calls,
            extract_calls: self.extract_calls - earlier.extract_calls,
        }
    }
}

/// Thread-safe record of every model call made through a gateway, tagged
/// with the video it was for and its wall-clock duration. Counters only
/// ever grow within a run.
#[derive(Debug, Default)]
pub struct CallLedger {
    records: Mutex<Vec<CallRecord>>,
}

impl CallLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, kind: CallKind, video_id: &str, elapsed: Duration) {
        self.records.lock().unwrap().push(CallRecord {
            kind,
            video_id: video_id.to_string(),
            seconds: elapsed.as_secs_f64(),
        });
    }

    pub fn count(&self, kind: CallKind) -> usize {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.kind == kind)
            .count()
    }

    pub fn counts(&self) -> LedgerCounts {
        let records = self.records.lock().unwrap();
        tally(records.iter())
    }

    pub fn counts_for_video(&self, video_id: &str) -> LedgerCounts {
        let records = self.records.lock().unwrap();
        tally(records.iter().filter(|r| r.video_id == video_id))
    }

    pub fn seconds_for_video(&self, video_id: &str) -> f64 {
        self.records
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.video_id == video_id)
            .map(|r| r.seconds)
            .sum()
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().unwrap().clone()
    }
}

fn tally<'a>(records: impl Iterator<Item = &'a CallRecord>) -> LedgerCounts {
    let mut counts = LedgerCounts::default();
    for r in records {
        match r.kind {
            CallKind::Describe => counts.describe_calls += 1,
            CallKind::Abstract => counts.abstract_calls += 1,
            CallKind::Embed => counts.embed_calls += 1,
            CallKind::Answer => counts.answer_calls += 1,
            CallKind::Extract => counts.extract_calls += 1,
        }
    }
    counts
}

/// Model identifiers of the backends behind a gateway. An index built with
/// one set of identifiers is stale for any other set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelIds {
    pub describer: String,
    pub abstractor: String,
    pub embedder: String,
    pub answerer: String,
}

/// One labeled multiple-choice option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: char,
    pub text: String,
}

impl AnswerOption {
    pub fn new(label: char, text: impl Into<String>) -> Self {
        Self {
            label: label.to_ascii_uppercase(),
            text: text.into(),
        }
    }
}

impl std::fmt::Display for AnswerOption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}. {}", self.label, self.text)
    }
}

pub(crate) fn validate_options(options: &[AnswerOption]) -> Result<()> {
    if options.len() < 2 || options.len() > 6 {
        return Err(Error::invalid_arg(format!(
            "expected 2 to 6 answer options, got {}",
            options.len()
        )));
    }
    for o in options {
        if !('A'..='F').contains(&o.label) {
            return Err(Error::invalid_arg(format!(
                "option label must be A-F, got {:?}",
                o.label
            )));
        }
    }
    Ok(())
}

/// The four model capabilities behind one uniform interface.
///
/// Implementations are shareable across threads and bound the number of
/// concurrently outstanding remote requests; every call is recorded in the
/// [`CallLedger`] atomically.
pub trait ModelGateway: Send + Sync {
    /// Free-text visual description of a set of frames.
    fn describe_frames(&self, video_id: &str, frames: &[ImageRef], prompt: &str)
        -> Result<String>;

    /// Distills text into one or more scene-level summaries. Always returns
    /// at least one scene: unparsable output falls back to the whole input.
    fn abstract_scenes(&self, video_id: &str, content: &str, prompt: &str)
        -> Result<Vec<String>>;

    /// Extracts scene descriptions from a question. Same text backend and
    /// parsing as [`abstract_scenes`](Self::abstract_scenes), but recorded as
    /// a per-question extract call rather than a per-video abstract call.
    fn extract_query(&self, video_id: &str, question: &str, prompt: &str)
        -> Result<Vec<String>>;

    /// One embedding per input text, order preserved, uniform dimension.
    fn embed(&self, video_id: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    /// Raw model reply to a multiple-choice question over the given frames.
    /// Choice parsing happens downstream.
    fn answer(
        &self,
        video_id: &str,
        frames: &[ImageRef],
        question: &str,
        options: &[AnswerOption],
    ) -> Result<String>;

    fn ledger(&self) -> &CallLedger;

    fn model_ids(&self) -> ModelIds;

    /// Upper bound on useful caller-side parallelism.
    fn max_concurrency(&self) -> usize {
        4
    }
}

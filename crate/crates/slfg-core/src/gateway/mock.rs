//! Deterministic mock backends for offline, reproducible end-to-end tests.
//!
//! Every operation is a pure function of its inputs: repeated calls with
//! equal inputs yield byte-identical outputs. The mock embedder has real
//! geometry (lexical overlap raises cosine similarity monotonically), so
//! localization behaves qualitatively like a live embedding model.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{
    validate_options, AnswerOption, CallKind, CallLedger, EmbeddingVector, ModelGateway, ModelIds,
};
use crate::hashing::fnv1a64;
use crate::sampling::ImageRef;

/// Opening sentinel the mock abstractor splits on.
pub const SCENE_OPEN: &str = "<scene>";
/// Closing sentinel the mock abstractor splits on.
pub const SCENE_CLOSE: &str = "</scene>";

const EMBED_BINS: usize = 256;

/// The mock embedder: an L2-normalized 256-bin hashed bag of character
/// trigrams of the lowercased input. Shared strings embed identically and
/// lexical overlap is monotone in cosine similarity.
pub fn trigram_embedding(text: &str) -> EmbeddingVector {
    let lower = text.to_lowercase();
    let bytes = lower.as_bytes();
    let mut bins = vec![0.0f64; EMBED_BINS];
    if bytes.len() < 3 {
        bins[(fnv1a64(bytes) % EMBED_BINS as u64) as usize] += 1.0;
    } else {
        for gram in bytes.windows(3) {
            bins[(fnv1a64(gram) % EMBED_BINS as u64) as usize] += 1.0;
        }
    }
    let norm = bins.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut bins {
        *v /= norm;
    }
    EmbeddingVector::new(bins).expect("non-empty by construction")
}

fn split_scenes(content: &str) -> Result<Vec<String>> {
    if content.is_empty() {
        return Err(Error::invalid_arg("scene splitting requires content"));
    }
    let mut scenes = parse_scene_markers(content);
    if scenes.is_empty() {
        tracing::debug!("no scene sentinels found; using whole content as one scene");
        scenes.push(content.to_string());
    }
    Ok(scenes)
}

/// Substrings wrapped in scene sentinels, in order of appearance.
pub fn parse_scene_markers(text: &str) -> Vec<String> {
    let mut scenes = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find(SCENE_OPEN) {
        let after = &rest[open + SCENE_OPEN.len()..];
        let Some(close) = after.find(SCENE_CLOSE) else {
            break;
        };
        let inner = after[..close].trim();
        if !inner.is_empty() {
            scenes.push(inner.to_string());
        }
        rest = &after[close + SCENE_CLOSE.len()..];
    }
    scenes
}

/// An answer cue planted in a fixture: when the question contains
/// `question_contains` and the input frames include the frame at
/// `timestamp_ms`, the mock answerer replies with `letter`. An empty
/// `question_contains` matches every question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionCue {
    pub question_contains: String,
    pub timestamp_ms: u64,
    pub letter: char,
}

/// Serializable plantings that drive the mock backends: canned descriptions
/// keyed by the frame set they belong to, plus answer cues.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockFixture {
    /// Keyed by [`description_key`] of the frame refs.
    pub descriptions: BTreeMap<String, String>,
    pub cues: Vec<QuestionCue>,
}

/// Lookup key for a canned description: the sorted frame basenames joined
/// with `|`, so the key is stable across absolute-path changes.
pub fn description_key(frames: &[ImageRef]) -> String {
    let mut names: Vec<&str> = frames.iter().map(|r| r.basename()).collect();
    names.sort_unstable();
    names.join("|")
}

/// Deterministic stand-in for all four model capabilities.
#[derive(Debug, Default)]
pub struct MockGateway {
    fixture: MockFixture,
    ids: Option<ModelIds>,
    ledger: CallLedger,
}

impl MockGateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fixture(fixture: MockFixture) -> Self {
        Self {
            fixture,
            ..Self::default()
        }
    }

    /// Overrides the reported model identifiers, e.g. to exercise cache-key
    /// invalidation.
    pub fn with_ids(mut self, ids: ModelIds) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn from_fixture_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fixture: MockFixture = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("mock fixture {}: {e}", path.display())))?;
        Ok(Self::with_fixture(fixture))
    }

    pub fn plant_description(&mut self, frames: &[ImageRef], text: impl Into<String>) {
        self.fixture
            .descriptions
            .insert(description_key(frames), text.into());
    }

    pub fn plant_cue(&mut self, question_contains: impl Into<String>, t_ms: u64, letter: char) {
        self.fixture.cues.push(QuestionCue {
            question_contains: question_contains.into(),
            timestamp_ms: t_ms,
            letter: letter.to_ascii_uppercase(),
        });
    }
}

impl ModelGateway for MockGateway {
    fn describe_frames(
        &self,
        video_id: &str,
        frames: &[ImageRef],
        prompt: &str,
    ) -> Result<String> {
        let start = Instant::now();
        if frames.is_empty() {
            return Err(Error::invalid_arg("describe_frames requires frames"));
        }
        if prompt.is_empty() {
            return Err(Error::invalid_arg("describe_frames requires a prompt"));
        }
        let key = description_key(frames);
        let text = match self.fixture.descriptions.get(&key) {
            Some(planted) => planted.clone(),
            None => format!(
                "A sequence of {} frames from {} to {} showing generic unlabeled footage.",
                frames.len(),
                frames.first().map(|r| r.basename()).unwrap_or(""),
                frames.last().map(|r| r.basename()).unwrap_or(""),
            ),
        };
        self.ledger
            .record(CallKind::Describe, video_id, start.elapsed());
        Ok(text)
    }

    fn abstract_scenes(&self, video_id: &str, content: &str, prompt: &str) -> Result<Vec<String>> {
        let start = Instant::now();
        let _ = prompt;
        let scenes = split_scenes(content)?;
        self.ledger
            .record(CallKind::Abstract, video_id, start.elapsed());
        Ok(scenes)
    }

    fn extract_query(&self, video_id: &str, question: &str, prompt: &str) -> Result<Vec<String>> {
        let start = Instant::now();
        let _ = prompt;
        let scenes = split_scenes(question)?;
        self.ledger
            .record(CallKind::Extract, video_id, start.elapsed());
        Ok(scenes)
    }

    fn embed(&self, video_id: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let start = Instant::now();
        if texts.is_empty() {
            return Err(Error::invalid_arg("embed requires at least one text"));
        }
        if let Some(pos) = texts.iter().position(|t| t.is_empty()) {
            return Err(Error::invalid_arg(format!(
                "embed input {pos} is empty"
            )));
        }
        let vectors = texts.iter().map(|t| trigram_embedding(t)).collect();
        self.ledger
            .record(CallKind::Embed, video_id, start.elapsed());
        Ok(vectors)
    }

    fn answer(
        &self,
        video_id: &str,
        frames: &[ImageRef],
        question: &str,
        options: &[AnswerOption],
    ) -> Result<String> {
        let start = Instant::now();
        if frames.is_empty() {
            return Err(Error::invalid_arg("answer requires frames"));
        }
        validate_options(options)?;
        let reply = self
            .fixture
            .cues
            .iter()
            .find(|cue| {
                question.contains(&cue.question_contains)
                    && frames
                        .iter()
                        .any(|f| f.timestamp_ms() == Some(cue.timestamp_ms))
            })
            .map(|cue| cue.letter.to_string())
            // No cue frame in view: a fixed wrong-ish fallback, so tests see
            // mislocalization as an incorrect answer instead of silent luck.
            .unwrap_or_else(|| "A".to_string());
        self.ledger
            .record(CallKind::Answer, video_id, start.elapsed());
        Ok(reply)
    }

    fn ledger(&self) -> &CallLedger {
        &self.ledger
    }

    fn model_ids(&self) -> ModelIds {
        self.ids.clone().unwrap_or(ModelIds {
            describer: "mock-describer".to_string(),
            abstractor: "mock-abstractor".to_string(),
            embedder: "mock-embedder-trigram".to_string(),
            answerer: "mock-answerer".to_string(),
        })
    }
}

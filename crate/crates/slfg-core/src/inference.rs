//! The end-to-end ask operation and multiple-choice answer parsing.

use std::collections::HashSet;
use std::sync::LazyLock;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::gateway::prompts::PromptSet;
use crate::gateway::{validate_options, AnswerOption, ModelGateway};
use crate::indexing::{load_or_build_index, SceneIndex};
use crate::localization::{extract_query_scene, score_all, GroupScore, QueryScene};
use crate::reorg::{plan_selection, SelectionPlan};
use crate::sampling::ImageRef;

/// A parsed multiple-choice selection. Abstaining counts as incorrect when
/// scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Letter(char),
    Abstain,
}

impl Choice {
    pub fn letter(&self) -> Option<char> {
        match self {
            Choice::Letter(c) => Some(*c),
            Choice::Abstain => None,
        }
    }
}

impl std::fmt::Display for Choice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Choice::Letter(c) => write!(f, "{c}"),
            Choice::Abstain => f.write_str("abstain"),
        }
    }
}

impl Serialize for Choice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "abstain" {
            Ok(Choice::Abstain)
        } else if s.len() == 1 && s.chars().next().unwrap().is_ascii_uppercase() {
            Ok(Choice::Letter(s.chars().next().unwrap()))
        } else {
            Err(serde::de::Error::custom(format!("invalid choice {s:?}")))
        }
    }
}

/// Wall-clock seconds spent per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSeconds {
    pub index: f64,
    pub localize: f64,
    pub select: f64,
    pub answer: f64,
}

impl StageSeconds {
    pub fn total(&self) -> f64 {
        self.index + self.localize + self.select + self.answer
    }
}

/// The answer plus full provenance: which groups were selected, what was
/// sent to the model, and where the time went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub choice: Choice,
    pub raw_text: String,
    pub selected_groups: Vec<usize>,
    pub frame_count: usize,
    pub timings: StageSeconds,
    pub query_scene: String,
    pub plan: SelectionPlan,
    pub index_cache_hit: bool,
}

/// Everything `ask` computes before the answering call; also the whole
/// output of a dry run.
pub struct QuestionPlan {
    pub index: SceneIndex,
    pub index_cache_hit: bool,
    pub query: QueryScene,
    pub scores: Vec<GroupScore>,
    pub plan: SelectionPlan,
    pub timings: StageSeconds,
}

/// Loads or builds the index, localizes the question, and plans the frame
/// set, without calling the answering model.
pub fn plan_question(
    video_id: &str,
    question: &str,
    config: &PipelineConfig,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<QuestionPlan> {
    let mut timings = StageSeconds::default();

    let start = Instant::now();
    let (index, index_cache_hit) = load_or_build_index(
        &config.frames_root,
        video_id,
        &config.sampling,
        config.group_size,
        gateway,
        prompts,
        &config.index_root,
    )
    .map_err(|e| e.at_stage("index"))?;
    timings.index = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let query = extract_query_scene(video_id, question, gateway, prompts)
        .map_err(|e| e.at_stage("localize"))?;
    let scores = score_all(&index, &query).map_err(|e| e.at_stage("localize"))?;
    timings.localize = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let plan =
        plan_selection(&index, &scores, &config.selection).map_err(|e| e.at_stage("select"))?;
    timings.select = start.elapsed().as_secs_f64();

    Ok(QuestionPlan {
        index,
        index_cache_hit,
        query,
        scores,
        plan,
        timings,
    })
}

/// The full ask pipeline: load or build the index, localize, select and
/// reassemble frames, query the answering model, and parse its reply.
pub fn ask(
    video_id: &str,
    question: &str,
    options: &[AnswerOption],
    config: &PipelineConfig,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<Answer> {
    validate_options(options)?;
    let QuestionPlan {
        index: _,
        index_cache_hit,
        query,
        scores: _,
        plan,
        mut timings,
    } = plan_question(video_id, question, config, gateway, prompts)?;

    let start = Instant::now();
    let refs: Vec<ImageRef> = plan
        .final_frames
        .iter()
        .map(|f| f.image_ref.clone())
        .collect();
    let raw_text = gateway
        .answer(video_id, &refs, question, options)
        .map_err(|e| e.at_stage("answer"))?;
    timings.answer = start.elapsed().as_secs_f64();

    let choice = parse_choice(&raw_text, options);
    Ok(Answer {
        choice,
        raw_text,
        selected_groups: plan.selected.clone(),
        frame_count: plan.final_frames.len(),
        timings,
        query_scene: query.text,
        plan,
        index_cache_hit,
    })
}

static ANSWER_IS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\banswer\s+is\s*:?\s*[\(\[\*]*\s*([a-fA-F])\b").expect("valid regex")
});

/// Parses a raw model reply into a choice. First match wins, in order: a
/// lone leading letter ("B", "B.", "(B)"), an "answer is X" phrase, exact
/// option-text containment. Anything else abstains; this never fails.
pub fn parse_choice(raw: &str, options: &[AnswerOption]) -> Choice {
    let labels: HashSet<char> = options.iter().map(|o| o.label).collect();

    if let Some(c) = leading_letter(raw) {
        if labels.contains(&c) {
            return Choice::Letter(c);
        }
    }
    if let Some(caps) = ANSWER_IS.captures(raw) {
        let c = caps[1].chars().next().unwrap().to_ascii_uppercase();
        if labels.contains(&c) {
            return Choice::Letter(c);
        }
    }
    let raw_lower = raw.to_lowercase();
    for option in options {
        let text = option.text.trim();
        if !text.is_empty() && raw_lower.contains(&text.to_lowercase()) {
            return Choice::Letter(option.label);
        }
    }
    Choice::Abstain
}

fn leading_letter(raw: &str) -> Option<char> {
    let s = raw.trim_start();
    let s = s.strip_prefix(['(', '[']).unwrap_or(s);
    let mut chars = s.chars();
    let first = chars.next()?;
    if !first.is_ascii_alphabetic() {
        return None;
    }
    match chars.next() {
        None => Some(first.to_ascii_uppercase()),
        Some(next) if [')', ']', '.', ':', ','].contains(&next) || next.is_whitespace() => {
            Some(first.to_ascii_uppercase())
        }
        _ => None,
    }
}

//! Evaluation harness: loads line-oriented JSON datasets of multiple-choice
//! questions, runs the pipeline over every record, and reports accuracy plus
//! the call accounting that shows per-video index cost amortizing across
//! questions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::gateway::prompts::PromptSet;
use crate::gateway::{AnswerOption, LedgerCounts, ModelGateway};
use crate::inference::{ask, Choice};

/// One multiple-choice QA item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub video_id: String,
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub answer: char,
    pub category: Option<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    video_id: String,
    question: String,
    options: BTreeMap<String, String>,
    answer: String,
    #[serde(default)]
    category: Option<String>,
}

/// Reads one JSON object per line. Any malformed line aborts the load with
/// its line number; silently skipping records would skew accuracy.
pub fn load_dataset(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Dataset {
        path: path.to_path_buf(),
        line: 0,
        detail: format!("cannot read file: {e}"),
    })?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: line_no,
            detail: e.to_string(),
        })?;
        records.push(validate_record(raw).map_err(|detail| Error::Dataset {
            path: path.to_path_buf(),
            line: line_no,
            detail,
        })?);
    }
    if records.is_empty() {
        tracing::warn!("dataset {} contains no records", path.display());
    }
    Ok(records)
}

fn validate_record(raw: RawRecord) -> std::result::Result<EvalRecord, String> {
    if raw.video_id.is_empty() {
        return Err("empty video_id".into());
    }
    if raw.question.trim().is_empty() {
        return Err("empty question".into());
    }
    if raw.options.len() < 2 || raw.options.len() > 6 {
        return Err(format!("expected 2 to 6 options, got {}", raw.options.len()));
    }
    let mut options = Vec::with_capacity(raw.options.len());
    for (label, text) in &raw.options {
        let mut chars = label.chars();
        let (Some(c), None) = (chars.next(), chars.next()) else {
            return Err(format!("option label {label:?} is not a single letter"));
        };
        let c = c.to_ascii_uppercase();
        if !('A'..='F').contains(&c) {
            return Err(format!("option label {label:?} is outside A-F"));
        }
        if text.trim().is_empty() {
            return Err(format!("option {c} has empty text"));
        }
        options.push(AnswerOption::new(c, text.clone()));
    }
    let answer = raw.answer.trim().to_ascii_uppercase();
    let mut answer_chars = answer.chars();
    let (Some(answer), None) = (answer_chars.next(), answer_chars.next()) else {
        return Err(format!("answer {:?} is not a single letter", raw.answer));
    };
    if !options.iter().any(|o| o.label == answer) {
        return Err(format!(
            "answer {answer:?} is not among the option labels"
        ));
    }
    Ok(EvalRecord {
        video_id: raw.video_id,
        question: raw.question,
        options,
        answer,
        category: raw.category,
    })
}

/// Outcome of one record. Failed records carry the error text and score as
/// incorrect.
#[derive(Debug, Clone, Serialize)]
pub struct RecordOutcome {
    pub record: usize,
    pub video_id: String,
    pub expected: char,
    pub choice: Option<Choice>,
    pub correct: bool,
    pub selected_groups: Vec<usize>,
    pub frame_count: usize,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CategoryStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoStats {
    pub questions: usize,
    pub calls: LedgerCounts,
    pub avg_calls_per_question: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AmortizationRow {
    pub questions: usize,
    pub avg_calls_per_question: f64,
    pub avg_seconds_per_question: f64,
}

/// Aggregate results of one evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub per_video: BTreeMap<String, VideoStats>,
    pub avg_calls_per_question: f64,
    pub avg_seconds_per_question: f64,
    /// Projected average cost per question as the question count grows,
    /// derived from the measured one-time and per-question call costs.
    pub amortization: Vec<AmortizationRow>,
    pub outcomes: Vec<RecordOutcome>,
}

/// Average per-question cost when a one-time cost is amortized over `q`
/// questions.
pub fn projected_avg_per_question(one_time: f64, per_question: f64, q: usize) -> f64 {
    assert!(q >= 1, "at least one question");
    (one_time + q as f64 * per_question) / q as f64
}

/// Projection rows for the given question counts.
pub fn amortization_rows(
    one_time_calls: f64,
    per_question_calls: f64,
    one_time_seconds: f64,
    per_question_seconds: f64,
    question_counts: &[usize],
) -> Vec<AmortizationRow> {
    question_counts
        .iter()
        .map(|&q| AmortizationRow {
            questions: q,
            avg_calls_per_question: projected_avg_per_question(
                one_time_calls,
                per_question_calls,
                q,
            ),
            avg_seconds_per_question: projected_avg_per_question(
                one_time_seconds,
                per_question_seconds,
                q,
            ),
        })
        .collect()
}

/// Runs every record through the pipeline. Records for distinct videos may
/// run on up to `config.jobs` threads; records sharing a video run in order
/// so the first builds the index and the rest reuse it. Per-record failures
/// are recorded and the run continues.
pub fn run_eval(
    records: &[EvalRecord],
    config: &PipelineConfig,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<EvalReport> {
    let run_start = Instant::now();
    let ledger_before = gateway.ledger().counts();

    // group record indices by video, preserving record order within a video
    let mut by_video: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_video.entry(&r.video_id).or_default().push(i);
    }

    let queue: Mutex<Vec<(&str, Vec<usize>)>> = Mutex::new(by_video.into_iter().collect());
    let outcomes: Mutex<Vec<Option<RecordOutcome>>> =
        Mutex::new((0..records.len()).map(|_| None).collect());
    let per_video: Mutex<BTreeMap<String, VideoStats>> = Mutex::new(BTreeMap::new());

    let workers = config.jobs.max(1).min(queue.lock().unwrap().len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some((video_id, indices)) = queue.lock().unwrap().pop() else {
                    break;
                };
                let video_start = Instant::now();
                let calls_before = gateway.ledger().counts_for_video(video_id);
                for i in indices.iter().copied() {
                    let outcome = evaluate_record(i, &records[i], config, gateway, prompts);
                    outcomes.lock().unwrap()[i] = Some(outcome);
                }
                let calls = gateway
                    .ledger()
                    .counts_for_video(video_id)
                    .since(&calls_before);
                per_video.lock().unwrap().insert(
                    video_id.to_string(),
                    VideoStats {
                        questions: indices.len(),
                        calls,
                        avg_calls_per_question: calls.total() as f64 / indices.len() as f64,
                        seconds: video_start.elapsed().as_secs_f64(),
                    },
                );
            });
        }
    });

    let outcomes: Vec<RecordOutcome> = outcomes
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("every record evaluated"))
        .collect();
    let per_video = per_video.into_inner().unwrap();

    let total = outcomes.len();
    let correct = outcomes.iter().filter(|o| o.correct).count();
    let mut per_category: BTreeMap<String, CategoryStats> = BTreeMap::new();
    for (outcome, record) in outcomes.iter().zip(records) {
        let key = record
            .category
            .clone()
            .unwrap_or_else(|| "uncategorized".to_string());
        let stats = per_category.entry(key).or_default();
        stats.total += 1;
        if outcome.correct {
            stats.correct += 1;
        }
    }
    for stats in per_category.values_mut() {
        stats.accuracy = stats.correct as f64 / stats.total as f64;
    }

    let calls_total = gateway.ledger().counts().since(&ledger_before).total();
    let seconds_total = run_start.elapsed().as_secs_f64();
    let amortization = measured_amortization(&per_video);

    Ok(EvalReport {
        total,
        correct,
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        per_category,
        per_video,
        avg_calls_per_question: if total == 0 {
            0.0
        } else {
            calls_total as f64 / total as f64
        },
        avg_seconds_per_question: if total == 0 {
            0.0
        } else {
            seconds_total / total as f64
        },
        amortization,
        outcomes,
    })
}

fn evaluate_record(
    record_idx: usize,
    record: &EvalRecord,
    config: &PipelineConfig,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> RecordOutcome {
    let start = Instant::now();
    match ask(
        &record.video_id,
        &record.question,
        &record.options,
        config,
        gateway,
        prompts,
    ) {
        Ok(answer) => RecordOutcome {
            record: record_idx,
            video_id: record.video_id.clone(),
            expected: record.answer,
            correct: answer.choice.letter() == Some(record.answer),
            choice: Some(answer.choice),
            selected_groups: answer.selected_groups,
            frame_count: answer.frame_count,
            seconds: start.elapsed().as_secs_f64(),
            error: None,
        },
        Err(e) => RecordOutcome {
            record: record_idx,
            video_id: record.video_id.clone(),
            expected: record.answer,
            choice: None,
            correct: false,
            selected_groups: Vec::new(),
            frame_count: 0,
            seconds: start.elapsed().as_secs_f64(),
            error: Some(e.to_string()),
        },
    }
}

/// Derives the one-time and per-question call cost from the measured
/// per-video ledgers, then projects average cost for growing question
/// counts. Describe and abstract calls happen once per video; the embed
/// call made at index time is the embed surplus over the answer count.
fn measured_amortization(per_video: &BTreeMap<String, VideoStats>) -> Vec<AmortizationRow> {
    let Some(stats) = per_video.values().max_by_key(|v| v.questions) else {
        return Vec::new();
    };
    if stats.questions == 0 {
        return Vec::new();
    }
    let calls = stats.calls;
    let index_embeds = calls.embed_calls.saturating_sub(calls.answer_calls);
    let one_time = (calls.describe_calls + calls.abstract_calls + index_embeds) as f64;
    let per_question = (calls.total() as f64 - one_time) / stats.questions as f64;
    let one_time_seconds = 0.0; // wall-clock split is not measured per phase
    let per_second = stats.seconds / stats.questions as f64;
    amortization_rows(
        one_time,
        per_question,
        one_time_seconds,
        per_second,
        &[1, 2, 5, 10],
    )
}

impl EvalReport {
    /// Accuracy recomputed from the per-record outcomes; equals `accuracy`.
    pub fn recomputed_accuracy(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.outcomes.iter().filter(|o| o.correct).count() as f64 / self.outcomes.len() as f64
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "questions:  {}", self.total);
        let _ = writeln!(out, "correct:    {}", self.correct);
        let _ = writeln!(out, "accuracy:   {:.4}", self.accuracy);
        let _ = writeln!(out, "avg calls/question:   {:.2}", self.avg_calls_per_question);
        let _ = writeln!(out, "avg seconds/question: {:.3}", self.avg_seconds_per_question);
        if !self.per_category.is_empty() {
            let _ = writeln!(out, "\nper category:");
            for (name, stats) in &self.per_category {
                let _ = writeln!(
                    out,
                    "  {:<24} {:>3}/{:<3} {:.4}",
                    name, stats.correct, stats.total, stats.accuracy
                );
            }
        }
        if !self.per_video.is_empty() {
            let _ = writeln!(out, "\nper video:");
            let _ = writeln!(
                out,
                "  {:<24} {:>4} {:>9} {:>9} {:>8} {:>6} {:>7} {:>10}",
                "video", "q", "describe", "abstract", "extract", "embed", "answer", "avg calls"
            );
            for (video, stats) in &self.per_video {
                let _ = writeln!(
                    out,
                    "  {:<24} {:>4} {:>9} {:>9} {:>8} {:>6} {:>7} {:>10.2}",
                    video,
                    stats.questions,
                    stats.calls.describe_calls,
                    stats.calls.abstract_calls,
                    stats.calls.extract_calls,
                    stats.calls.embed_calls,
                    stats.calls.answer_calls,
                    stats.avg_calls_per_question
                );
            }
        }
        if !self.amortization.is_empty() {
            let _ = writeln!(out, "\nprojected avg cost per question:");
            let _ = writeln!(out, "  {:>4} {:>12} {:>14}", "q", "calls/q", "seconds/q");
            for row in &self.amortization {
                let _ = writeln!(
                    out,
                    "  {:>4} {:>12.2} {:>14.3}",
                    row.questions, row.avg_calls_per_question, row.avg_seconds_per_question
                );
            }
        }
        out
    }
}

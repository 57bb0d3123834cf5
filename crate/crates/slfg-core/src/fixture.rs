//! A synthetic planted video for offline end-to-end runs.
//!
//! The standard fixture is a 1795-second video sampled every 10 seconds:
//! 180 frames in 12 groups (eleven of 16, one ragged tail of 4). Each group
//! carries a distinctive planted scene text; eight extra scene texts are
//! planted in two adjacent groups each, with the answer cue in the second
//! group of the pair, so single-group strategies demonstrably miss them.
//! Every question embeds its scene text verbatim, which makes correct
//! localization imply a correct answer and wrong localization a visible "A".

use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::eval::EvalRecord;
use crate::frames::{frame_file_name, FrameDir, FrameManifest};
use crate::gateway::mock::{description_key, MockFixture, MockGateway, QuestionCue, SCENE_CLOSE, SCENE_OPEN};
use crate::gateway::AnswerOption;
use crate::sampling::{ImageRef, SamplingConfig};

pub const DURATION_S: f64 = 1795.0;
pub const INTERVAL_MS: u64 = 10_000;
pub const GROUP_SIZE: usize = 16;
pub const FRAME_COUNT: usize = 180;
pub const GROUP_COUNT: usize = 12;
pub const SPLIT_PAIRS: usize = 8;

/// One scene text per group, pairwise lexically distant under the trigram
/// embedder (max cross cosine 0.45, checked by test).
const SINGLE_TEXTS: [&str; GROUP_COUNT] = [
    "a chef in a white apron chops onions in a steel kitchen",
    "two hikers cross a rope bridge above a foggy ravine",
    "a mechanic rolls under a rusty pickup truck with a wrench",
    "children fly striped kites on a windy beach at dusk",
    "a violinist performs under a stone archway for a small crowd",
    "a barista pours latte art in a crowded corner cafe",
    "firefighters hose down a smoking warehouse roof at night",
    "a gardener prunes climbing roses along a brick wall",
    "surfers paddle past the break toward an orange horizon",
    "a librarian shelves leather books on a rolling ladder",
    "welders shower sparks across a dim factory floor",
    "a magician pulls scarves from a top hat on stage",
];

/// Scene texts planted in groups (k, k+1) for k in 0..8; their cue frame
/// sits in group k+1.
const PAIR_TEXTS: [&str; SPLIT_PAIRS] = [
    "a delivery rider weaves a yellow bicycle through traffic",
    "a painter tapes the edges of a tall blue mural",
    "divers descend along a coral wall with flashlights",
    "a shepherd whistles two dogs around a scattered flock",
    "skaters grind a painted rail outside a concrete plaza",
    "a tailor pins a chalk-marked suit on a wooden mannequin",
    "rowers pull a long shell beneath a low iron bridge",
    "a beekeeper lifts a dripping frame from a humming hive",
];

const OPTION_TEXTS: [&str; 4] = [
    "nothing notable happens",
    "the main activity continues and concludes",
    "someone new enters the scene",
    "the setting changes abruptly",
];

/// One fixture question with its ground truth.
#[derive(Debug, Clone)]
pub struct FixtureQuestion {
    pub record: EvalRecord,
    /// The group holding the answer cue.
    pub expected_group: usize,
    /// True when answering requires the pair (expected_group - 1,
    /// expected_group), which single-group strategies miss.
    pub split_evidence: bool,
}

/// A built fixture: frames on disk plus the plantings that drive the mocks.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub frames_root: PathBuf,
    pub video_id: String,
    pub sampling: SamplingConfig,
    pub group_size: usize,
    pub duration_ms: u64,
    pub questions: Vec<FixtureQuestion>,
    pub mock: MockFixture,
    pub sentinel_count: usize,
}

impl Fixture {
    /// A gateway backed by this fixture's plantings.
    pub fn gateway(&self) -> MockGateway {
        MockGateway::with_fixture(self.mock.clone())
    }

    /// A pipeline config rooted at this fixture, defaults otherwise.
    pub fn pipeline_config(&self, index_root: &Path) -> PipelineConfig {
        PipelineConfig {
            sampling: self.sampling,
            group_size: self.group_size,
            frames_root: self.frames_root.clone(),
            index_root: index_root.to_path_buf(),
            ..PipelineConfig::default()
        }
    }

    pub fn records(&self) -> Vec<EvalRecord> {
        self.questions.iter().map(|q| q.record.clone()).collect()
    }

    /// Writes the questions as a JSONL dataset.
    pub fn write_dataset(&self, path: &Path) -> Result<()> {
        let mut lines = String::new();
        for q in &self.questions {
            let mut options = serde_json::Map::new();
            for o in &q.record.options {
                options.insert(o.label.to_string(), o.text.clone().into());
            }
            let mut obj = serde_json::Map::new();
            obj.insert("video_id".into(), q.record.video_id.clone().into());
            obj.insert("question".into(), q.record.question.clone().into());
            obj.insert("options".into(), options.into());
            obj.insert("answer".into(), q.record.answer.to_string().into());
            if let Some(c) = &q.record.category {
                obj.insert("category".into(), c.clone().into());
            }
            lines.push_str(&serde_json::to_string(&obj).unwrap());
            lines.push('\n');
        }
        std::fs::write(path, lines)?;
        Ok(())
    }

    /// Writes the mock plantings for `slfg --mock --mock-fixtures`.
    pub fn write_mock_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.mock).unwrap())?;
        Ok(())
    }
}

fn group_timestamps(group: usize) -> Vec<u64> {
    let first = group * GROUP_SIZE;
    let last = (first + GROUP_SIZE).min(FRAME_COUNT);
    (first..last).map(|i| i as u64 * INTERVAL_MS).collect()
}

/// A frame near the middle of the group, so window extension on either side
/// never drops it.
fn cue_timestamp(group: usize) -> u64 {
    let ts = group_timestamps(group);
    ts[ts.len() / 2]
}

fn wrap(text: &str) -> String {
    format!("{SCENE_OPEN}{text}{SCENE_CLOSE}")
}

/// Builds the standard fixture under `frames_root/<video_id>/`.
pub fn build_fixture(frames_root: &Path, video_id: &str) -> Result<Fixture> {
    let dir = frames_root.join(video_id);
    std::fs::create_dir_all(&dir)?;
    let timestamps: Vec<u64> = (0..FRAME_COUNT).map(|i| i as u64 * INTERVAL_MS).collect();
    for &t in &timestamps {
        std::fs::write(dir.join(frame_file_name(t)), [0xFF, 0xD8, 0xFF, 0xD9])?;
    }
    FrameDir::create(
        &dir,
        FrameManifest {
            video_id: video_id.to_string(),
            duration_s: DURATION_S,
            interval_s: INTERVAL_MS as f64 / 1000.0,
            frames: timestamps,
        },
    )?;

    let mut mock = MockFixture::default();
    let mut sentinel_count = 0;

    for (group, single_text) in SINGLE_TEXTS.iter().enumerate() {
        let ts = group_timestamps(group);
        let refs: Vec<ImageRef> = ts
            .iter()
            .map(|&t| ImageRef::new(frame_file_name(t)))
            .collect();
        let mut description = format!(
            "Between {}s and {}s the camera moves through connected spaces. ",
            ts[0] / 1000,
            ts.last().unwrap() / 1000 + 10
        );
        description.push_str(&wrap(single_text));
        sentinel_count += 1;
        for (pair, text) in PAIR_TEXTS.iter().enumerate() {
            if group == pair || group == pair + 1 {
                description.push(' ');
                description.push_str(&wrap(text));
                sentinel_count += 1;
            }
        }
        mock.descriptions.insert(description_key(&refs), description);
    }

    let mut questions = Vec::new();
    let letters = ['B', 'C', 'D'];

    for group in 0..GROUP_COUNT {
        let answer = letters[group % letters.len()];
        let question = format!(
            "At one point {} is on screen. What happens in that scene?",
            wrap(SINGLE_TEXTS[group])
        );
        mock.cues.push(QuestionCue {
            question_contains: SINGLE_TEXTS[group].to_string(),
            timestamp_ms: cue_timestamp(group),
            letter: answer,
        });
        questions.push(FixtureQuestion {
            record: EvalRecord {
                video_id: video_id.to_string(),
                question,
                options: option_set(),
                answer,
                category: Some(
                    if group % 2 == 0 {
                        "detail_recognition"
                    } else {
                        "causal_reasoning"
                    }
                    .to_string(),
                ),
            },
            expected_group: group,
            split_evidence: false,
        });
    }

    for (pair, text) in PAIR_TEXTS.iter().enumerate() {
        let cue_group = pair + 1;
        let answer = letters[(pair + 1) % letters.len()];
        let question = format!("Right after {} appears, what happens next?", wrap(text));
        mock.cues.push(QuestionCue {
            question_contains: text.to_string(),
            timestamp_ms: cue_timestamp(cue_group),
            letter: answer,
        });
        questions.push(FixtureQuestion {
            record: EvalRecord {
                video_id: video_id.to_string(),
                question,
                options: option_set(),
                answer,
                category: Some("causal_reasoning".to_string()),
            },
            expected_group: cue_group,
            split_evidence: true,
        });
    }

    Ok(Fixture {
        frames_root: frames_root.to_path_buf(),
        video_id: video_id.to_string(),
        sampling: SamplingConfig::new(INTERVAL_MS, 0)?,
        group_size: GROUP_SIZE,
        duration_ms: (DURATION_S * 1000.0) as u64,
        questions,
        mock,
        sentinel_count,
    })
}

fn option_set() -> Vec<AnswerOption> {
    "ABCD"
        .chars()
        .zip(OPTION_TEXTS)
        .map(|(label, text)| AnswerOption::new(label, text))
        .collect()
}

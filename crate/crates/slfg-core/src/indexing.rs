//! Builds the per-video scene index: sample the frame grid, group it,
//! describe each group, abstract each description into scene summaries, and
//! embed every scene eagerly so later questions cost nothing but a query
//! embedding.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::FrameDir;
use crate::gateway::prompts::PromptSet;
use crate::gateway::{EmbeddingVector, ModelGateway};
use crate::sampling::{group_frames, Frame, FrameGroup, SamplingConfig};
use crate::store::{load_index, save_index, IndexKey};

/// Free-text visual description of one frame group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDescription {
    pub group_index: usize,
    pub text: String,
}

/// One scene-level summary distilled from a group description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub group_index: usize,
    pub scene_index: usize,
    pub text: String,
    pub embedding: Option<EmbeddingVector>,
}

/// The persisted per-video artifact: everything the pipeline needs to answer
/// questions without re-describing the video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneIndex {
    pub video_id: String,
    pub sampling: SamplingConfig,
    pub group_size: usize,
    pub duration_ms: u64,
    pub describer_id: String,
    pub abstractor_id: String,
    pub embedder_id: String,
    pub groups: Vec<FrameGroup>,
    pub descriptions: Vec<GroupDescription>,
    pub scenes: Vec<SceneSummary>,
    pub created_at: String,
}

impl SceneIndex {
    pub fn key(&self) -> IndexKey {
        IndexKey {
            video_id: self.video_id.clone(),
            interval_ms: self.sampling.interval_ms,
            group_size: self.group_size,
            describer_id: self.describer_id.clone(),
            abstractor_id: self.abstractor_id.clone(),
            embedder_id: self.embedder_id.clone(),
        }
    }

    pub fn group(&self, group_index: usize) -> Result<&FrameGroup> {
        self.groups.get(group_index).ok_or_else(|| {
            Error::InvalidState(format!("group {group_index} not in index"))
        })
    }

    /// Scenes of each group, indexed by group.
    pub fn scenes_by_group(&self) -> Vec<Vec<&SceneSummary>> {
        let mut by_group: Vec<Vec<&SceneSummary>> = vec![Vec::new(); self.groups.len()];
        for scene in &self.scenes {
            if let Some(slot) = by_group.get_mut(scene.group_index) {
                slot.push(scene);
            }
        }
        by_group
    }

    /// Every sampled frame keyed by its grid timestamp.
    pub fn frames_by_timestamp(&self) -> HashMap<u64, &Frame> {
        self.groups
            .iter()
            .flat_map(|g| g.frames.iter())
            .map(|f| (f.timestamp_ms, f))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptions.len() != self.groups.len() {
            return Err(Error::InvalidState(format!(
                "{} descriptions for {} groups",
                self.descriptions.len(),
                self.groups.len()
            )));
        }
        for (k, (group, desc)) in self.groups.iter().zip(&self.descriptions).enumerate() {
            if group.group_index != k || desc.group_index != k {
                return Err(Error::InvalidState(format!("group order broken at {k}")));
            }
            if desc.text.is_empty() {
                return Err(Error::InvalidState(format!("empty description for group {k}")));
            }
            if group.frames.is_empty() {
                return Err(Error::InvalidState(format!("group {k} has no frames")));
            }
        }
        let mut scene_count = vec![0usize; self.groups.len()];
        let mut seen = std::collections::HashSet::new();
        for scene in &self.scenes {
            if scene.group_index >= self.groups.len() {
                return Err(Error::InvalidState(format!(
                    "scene references missing group {}",
                    scene.group_index
                )));
            }
            if scene.text.is_empty() {
                return Err(Error::InvalidState("empty scene text".into()));
            }
            if !seen.insert((scene.group_index, scene.scene_index)) {
                return Err(Error::InvalidState(format!(
                    "duplicate scene ({}, {})",
                    scene.group_index, scene.scene_index
                )));
            }
            scene_count[scene.group_index] += 1;
        }
        if let Some(k) = scene_count.iter().position(|&n| n == 0) {
            return Err(Error::InvalidState(format!("group {k} has no scenes")));
        }
        let embedded: Vec<usize> = self
            .scenes
            .iter()
            .filter_map(|s| s.embedding.as_ref().map(EmbeddingVector::dimension))
            .collect();
        if !embedded.is_empty() {
            if embedded.len() != self.scenes.len() {
                return Err(Error::InvalidState(
                    "some scenes are embedded and some are not".into(),
                ));
            }
            if embedded.iter().any(|&d| d != embedded[0]) {
                return Err(Error::InvalidState(
                    "scene embeddings have mixed dimensions".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Describes one frame group through the gateway, with the group's frame
/// timestamps injected into the prompt.
pub fn describe_group(
    video_id: &str,
    group: &FrameGroup,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<GroupDescription> {
    let timestamps: Vec<u64> = group.timestamps().collect();
    let prompt = prompts.describe_prompt(&timestamps);
    let refs: Vec<_> = group.frames.iter().map(|f| f.image_ref.clone()).collect();
    let text = gateway.describe_frames(video_id, &refs, &prompt)?;
    if text.is_empty() {
        return Err(Error::MalformedResponse(format!(
            "empty description for group {}",
            group.group_index
        )));
    }
    Ok(GroupDescription {
        group_index: group.group_index,
        text,
    })
}

/// Abstracts a group description into scene summaries, all attributed to the
/// description's group.
pub fn generate_scenes(
    video_id: &str,
    description: &GroupDescription,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<Vec<SceneSummary>> {
    let mut scenes =
        gateway.abstract_scenes(video_id, &description.text, prompts.abstraction_prompt())?;
    scenes.retain(|s| !s.trim().is_empty());
    if scenes.is_empty() {
        tracing::warn!(
            group = description.group_index,
            "no usable scenes; falling back to the whole description"
        );
        scenes.push(description.text.clone());
    }
    Ok(scenes
        .into_iter()
        .enumerate()
        .map(|(scene_index, text)| SceneSummary {
            group_index: description.group_index,
            scene_index,
            text,
            embedding: None,
        })
        .collect())
}

/// Builds a fresh index for the frame directory. Per-group description and
/// abstraction run concurrently up to the gateway's concurrency bound; the
/// assembled index is ordered by group regardless of completion order.
pub fn build_index(
    dir: &FrameDir,
    sampling: &SamplingConfig,
    group_size: usize,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<SceneIndex> {
    let video_id = dir.video_id().to_string();
    let frames = dir.resolve_frames(sampling)?;
    let groups = group_frames(frames, group_size, sampling)?;

    let workers = gateway.max_concurrency().max(1).min(groups.len());
    let per_group = parallel_map(&groups, workers, |group| {
        let description = describe_group(&video_id, group, gateway, prompts)?;
        let scenes = generate_scenes(&video_id, &description, gateway, prompts)?;
        Ok((description, scenes))
    })?;

    let mut descriptions = Vec::with_capacity(groups.len());
    let mut scenes: Vec<SceneSummary> = Vec::new();
    for (description, group_scenes) in per_group {
        descriptions.push(description);
        scenes.extend(group_scenes);
    }

    let texts: Vec<String> = scenes.iter().map(|s| s.text.clone()).collect();
    let embeddings = gateway.embed(&video_id, &texts)?;
    if embeddings.len() != scenes.len() {
        return Err(Error::MalformedResponse(format!(
            "asked for {} embeddings, got {}",
            scenes.len(),
            embeddings.len()
        )));
    }
    for (scene, embedding) in scenes.iter_mut().zip(embeddings) {
        scene.embedding = Some(embedding);
    }

    let ids = gateway.model_ids();
    let index = SceneIndex {
        video_id,
        sampling: *sampling,
        group_size,
        duration_ms: dir.duration_ms(),
        describer_id: ids.describer,
        abstractor_id: ids.abstractor,
        embedder_id: ids.embedder,
        groups,
        descriptions,
        scenes,
        created_at: chrono::Utc::now().to_rfc3339(),
    };
    index.validate()?;
    Ok(index)
}

/// Returns the stored index for this exact key if one exists, otherwise
/// builds, stores, and returns a fresh one. The boolean reports a cache hit.
pub fn load_or_build_index(
    frames_root: &Path,
    video_id: &str,
    sampling: &SamplingConfig,
    group_size: usize,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
    index_root: &Path,
) -> Result<(SceneIndex, bool)> {
    let ids = gateway.model_ids();
    let key = IndexKey {
        video_id: video_id.to_string(),
        interval_ms: sampling.interval_ms,
        group_size,
        describer_id: ids.describer,
        abstractor_id: ids.abstractor,
        embedder_id: ids.embedder,
    };
    if let Some(index) = load_index(&key, index_root)? {
        tracing::debug!(video_id, "scene index cache hit");
        return Ok((index, true));
    }
    let dir = FrameDir::open(frames_root.join(video_id))?;
    let index = build_index(&dir, sampling, group_size, gateway, prompts)?;
    save_index(&index, index_root)?;
    Ok((index, false))
}

/// Applies `f` to every item on up to `workers` threads, preserving input
/// order in the output. Errors are reported for the earliest failing item.
fn parallel_map<T, U, F>(items: &[T], workers: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let slots: Vec<Mutex<Option<Result<U>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(f(&items[i]));
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

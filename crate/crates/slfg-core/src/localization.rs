//! Localizes a question to frame groups: extract the scene description from
//! the question, embed it, and score every group by the maximum cosine
//! similarity between the query scene and the group's scene summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::prompts::PromptSet;
use crate::gateway::{EmbeddingVector, ModelGateway};
use crate::indexing::{SceneIndex, SceneSummary};

/// The scene description extracted from a question, with its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScene {
    pub question: String,
    pub text: String,
    pub embedding: EmbeddingVector,
}

/// A group's relevance to the query scene. `score` maps the raw cosine
/// affinely from [-1, 1] to [0, 1]: the downstream relative threshold is
/// ill-defined for non-positive scores, normalizing makes it total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group_index: usize,
    pub score: f64,
    pub raw_cosine: f64,
    pub best_scene_index: usize,
}

pub fn normalize_score(raw_cosine: f64) -> f64 {
    (raw_cosine + 1.0) / 2.0
}

/// Extracts the query scene via the text backend and embeds it. An empty
/// extraction falls back to embedding the raw question.
pub fn extract_query_scene(
    video_id: &str,
    question: &str,
    gateway: &dyn ModelGateway,
    prompts: &PromptSet,
) -> Result<QueryScene> {
    if question.trim().is_empty() {
        return Err(Error::invalid_arg("question is empty"));
    }
    let extracted = gateway
        .extract_query(video_id, question, prompts.query_scene_prompt())?
        .into_iter()
        .map(|s| s.trim().to_string())
        .find(|s| !s.is_empty());
    let text = match extracted {
        Some(text) => text,
        None => {
            tracing::warn!("scene extraction came back empty; embedding the raw question");
            question.to_string()
        }
    };
    let embedding = gateway
        .embed(video_id, std::slice::from_ref(&text))?
        .into_iter()
        .next()
        .ok_or_else(|| Error::MalformedResponse("embed returned no vector".into()))?;
    Ok(QueryScene {
        question: question.to_string(),
        text,
        embedding,
    })
}

/// Cosine similarity of two equal-dimension, nonzero vectors, in [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dimension() != v.dimension() {
        return Err(Error::invalid_arg(format!(
            "dimension mismatch: {} vs {}",
            u.dimension(),
            v.dimension()
        )));
    }
    let dot: f64 = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| a * b)
        .sum();
    let nu = u.l2_norm();
    let nv = v.l2_norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid_arg("cosine of a zero vector"));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Scores one group: the best cosine over its scene summaries, ties broken
/// toward the lowest scene index.
pub fn score_group(scenes: &[&SceneSummary], query: &QueryScene) -> Result<GroupScore> {
    if scenes.is_empty() {
        return Err(Error::invalid_arg("score_group requires scenes"));
    }
    let group_index = scenes[0].group_index;
    let mut best: Option<(f64, usize)> = None;
    for scene in scenes {
        let embedding = scene.embedding.as_ref().ok_or_else(|| {
            Error::InvalidState(format!(
                "scene ({}, {}) has no embedding",
                scene.group_index, scene.scene_index
            ))
        })?;
        let c = cosine(embedding, &query.embedding)?;
        let better = match best {
            None => true,
            Some((best_c, _)) => c > best_c,
        };
        if better {
            best = Some((c, scene.scene_index));
        }
    }
    let (raw_cosine, best_scene_index) = best.expect("non-empty scenes");
    Ok(GroupScore {
        group_index,
        score: normalize_score(raw_cosine),
        raw_cosine,
        best_scene_index,
    })
}

/// Scores every group in the index and sorts descending; equal scores rank
/// the earlier group first.
pub fn score_all(index: &SceneIndex, query: &QueryScene) -> Result<Vec<GroupScore>> {
    let mut scores = Vec::with_capacity(index.groups.len());
    for scenes in index.scenes_by_group() {
        scores.push(score_group(&scenes, query)?);
    }
    scores.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(a.group_index.cmp(&b.group_index))
    });
    Ok(scores)
}

//! Turns sorted group scores into the final frame set: keep or discard
//! groups by the score-gap rule, split the remaining frame budget across the
//! kept groups, extend each group's temporal window, and assemble a frame
//! list that never exceeds the model's context budget.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexing::SceneIndex;
use crate::localization::GroupScore;
use crate::sampling::{Frame, FrameGroup};

/// How the kept set of groups is chosen from the sorted scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    /// The single best group, no merging, no extension.
    Top1,
    /// The best `topn_n` groups, no merging, no extension.
    TopN,
    /// Walk the sorted scores and keep groups while consecutive scores stay
    /// within the threshold; kept groups get budget-funded window extension.
    Dynamic,
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "top1" => Ok(Self::Top1),
            "topn" => Ok(Self::TopN),
            "dynamic" => Ok(Self::Dynamic),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?}; expected top1, topn, or dynamic"
            ))),
        }
    }
}

impl std::fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Top1 => "top1",
            Self::TopN => "topn",
            Self::Dynamic => "dynamic",
        })
    }
}

/// Whether the threshold compares the relative drop between consecutive
/// scores or their absolute difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub strategy: SelectionStrategy,
    /// Maximum tolerated drop between consecutive sorted scores before the
    /// rest of the ranking is discarded.
    pub threshold: f64,
    pub threshold_mode: ThresholdMode,
    /// The answering model's frame budget.
    pub max_frames: usize,
    /// Group count for the TopN strategy.
    pub topn_n: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            strategy: SelectionStrategy::Dynamic,
            threshold: 0.10,
            threshold_mode: ThresholdMode::Relative,
            max_frames: 64,
            topn_n: 3,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.max_frames == 0 {
            return Err(Error::Config("max_frames must be at least 1".into()));
        }
        if self.topn_n == 0 {
            return Err(Error::Config("topn_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// True when the drop from `hi` to the next sorted score `lo` is at or past
/// the threshold, meaning `lo` and everything below it are discarded.
///
/// The relative test is evaluated as a score ratio, which is algebraically
/// the same as `(hi - lo) / hi >= threshold` but keeps the decision exactly
/// invariant under rescaling all scores by a constant.
fn gap_discards(hi: f64, lo: f64, config: &SelectionConfig) -> bool {
    match config.threshold_mode {
        ThresholdMode::Relative => {
            if hi <= 0.0 {
                false // both scores are zero at this point in a sorted list
            } else {
                lo / hi <= 1.0 - config.threshold
            }
        }
        ThresholdMode::Absolute => hi - lo >= config.threshold,
    }
}

/// Picks group indices from descending scores, in rank order. The top group
/// is always kept.
pub fn select_groups(sorted_scores: &[GroupScore], config: &SelectionConfig) -> Result<Vec<usize>> {
    if sorted_scores.is_empty() {
        return Err(Error::invalid_arg("select_groups requires scores"));
    }
    if sorted_scores.windows(2).any(|w| w[1].score > w[0].score) {
        return Err(Error::invalid_arg("scores must be sorted descending"));
    }
    config.validate()?;
    match config.strategy {
        SelectionStrategy::Top1 => Ok(vec![sorted_scores[0].group_index]),
        SelectionStrategy::TopN => Ok(sorted_scores
            .iter()
            .take(config.topn_n)
            .map(|s| s.group_index)
            .collect()),
        SelectionStrategy::Dynamic => {
            let mut kept = vec![sorted_scores[0].group_index];
            for pair in sorted_scores.windows(2) {
                if gap_discards(pair[0].score, pair[1].score, config) {
                    break;
                }
                kept.push(pair[1].group_index);
            }
            Ok(kept)
        }
    }
}

/// What the allocator needs to know about one selected group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSpan {
    pub group_index: usize,
    pub frame_count: usize,
    pub start_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetAllocation {
    /// Extra frames granted per selected group, in input order.
    pub per_group: Vec<usize>,
    /// Set when the selected groups' base frames alone exceed the budget; no
    /// extensions are granted and assembly subsamples down to the budget.
    pub over_budget: bool,
}

/// Splits the remaining frame budget evenly across the selected groups; the
/// division remainder goes one frame each to the groups with the largest
/// time span, ties toward the earliest start.
pub fn allocate_budget(
    selected: &[GroupSpan],
    max_frames: usize,
    interval_ms: u64,
) -> Result<BudgetAllocation> {
    if selected.is_empty() {
        return Err(Error::invalid_arg("allocate_budget requires groups"));
    }
    let total: usize = selected.iter().map(|g| g.frame_count).sum();
    if total > max_frames {
        return Ok(BudgetAllocation {
            per_group: vec![0; selected.len()],
            over_budget: true,
        });
    }
    let remaining = max_frames - total;
    let n = selected.len();
    let mut per_group = vec![remaining / n; n];
    let leftover = remaining % n;
    if leftover > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let span_a = selected[a].frame_count as u64 * interval_ms;
            let span_b = selected[b].frame_count as u64 * interval_ms;
            span_b
                .cmp(&span_a)
                .then(selected[a].start_ms.cmp(&selected[b].start_ms))
        });
        for &i in order.iter().take(leftover) {
            per_group[i] += 1;
        }
    }
    Ok(BudgetAllocation {
        per_group,
        over_budget: false,
    })
}

/// Grid timestamps added around one group's window.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupExtension {
    /// Before the window start, nearest first.
    pub before: Vec<u64>,
    /// From the window end outward, nearest first.
    pub after: Vec<u64>,
}

impl GroupExtension {
    pub fn len(&self) -> usize {
        self.before.len() + self.after.len()
    }

    pub fn is_empty(&self) -> bool {
        self.before.is_empty() && self.after.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = u64> + '_ {
        self.before.iter().chain(self.after.iter()).copied()
    }
}

/// Picks `extra` grid timestamps around the group window: half rounded up
/// before, half rounded down after. Candidates outside [0, duration] are
/// clipped and occupied ones are skipped; shortfall on one side spills to
/// the other, and whatever still cannot be placed is surrendered.
pub fn extend_group(
    group: &FrameGroup,
    extra: usize,
    interval_ms: u64,
    duration_ms: u64,
    occupied: &HashSet<u64>,
) -> GroupExtension {
    let want_before = extra.div_ceil(2);
    let want_after = extra - want_before;

    let mut before_cursor = group.start_ms;
    let mut after_cursor = group.end_ms;
    let mut before = take_before(&mut before_cursor, want_before, interval_ms, occupied);
    let missing_before = want_before - before.len();
    let after = take_after(
        &mut after_cursor,
        want_after + missing_before,
        interval_ms,
        duration_ms,
        occupied,
    );
    let still_missing = (want_after + missing_before) - after.len();
    if still_missing > 0 {
        before.extend(take_before(
            &mut before_cursor,
            still_missing,
            interval_ms,
            occupied,
        ));
    }
    GroupExtension { before, after }
}

fn take_before(
    cursor: &mut u64,
    quota: usize,
    interval_ms: u64,
    occupied: &HashSet<u64>,
) -> Vec<u64> {
    let mut out = Vec::with_capacity(quota);
    while out.len() < quota {
        let Some(t) = cursor.checked_sub(interval_ms) else {
            break;
        };
        *cursor = t;
        if !occupied.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn take_after(
    cursor: &mut u64,
    quota: usize,
    interval_ms: u64,
    duration_ms: u64,
    occupied: &HashSet<u64>,
) -> Vec<u64> {
    let mut out = Vec::with_capacity(quota);
    while out.len() < quota {
        let t = *cursor;
        if t > duration_ms {
            break;
        }
        *cursor += interval_ms;
        if !occupied.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Merges base and extension frames into one deduplicated, time-ordered
/// list. A merged list longer than the budget is uniformly subsampled down
/// to exactly `max_frames` by evenly spaced index selection, preserving
/// temporal coverage of every selected scene.
pub fn assemble_frames(
    groups: &[&FrameGroup],
    extensions: &[GroupExtension],
    frames_by_ts: &HashMap<u64, &Frame>,
    max_frames: usize,
) -> Vec<Frame> {
    let mut timestamps = BTreeSet::new();
    for group in groups {
        timestamps.extend(group.timestamps());
    }
    for ext in extensions {
        timestamps.extend(ext.timestamps());
    }
    let merged: Vec<u64> = timestamps.into_iter().collect();
    let picked: Vec<u64> = if merged.len() > max_frames {
        (0..max_frames)
            .map(|i| merged[i * merged.len() / max_frames])
            .collect()
    } else {
        merged
    };
    picked
        .into_iter()
        .filter_map(|t| frames_by_ts.get(&t).map(|f| (*f).clone()))
        .collect()
}

/// The reorganization output: which groups were kept, how the budget was
/// spent, and the final frame list fed to the answering model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    /// Kept groups in temporal order.
    pub selected: Vec<usize>,
    pub base_frames_per_group: Vec<usize>,
    /// Budgeted extra frames per selected group (granted, not necessarily
    /// all placeable at video edges).
    pub extensions: Vec<usize>,
    /// Placed extension timestamps per selected group: (before, after).
    pub extension_timestamps: Vec<(Vec<u64>, Vec<u64>)>,
    pub final_frames: Vec<Frame>,
    pub over_budget: bool,
}

impl SelectionPlan {
    pub fn frame_count(&self) -> usize {
        self.final_frames.len()
    }
}

/// Runs selection, budget allocation, window extension, and assembly against
/// an index. Only the dynamic strategy extends windows; top1/topn feed their
/// base frames (budget-capped) straight through.
pub fn plan_selection(
    index: &SceneIndex,
    sorted_scores: &[GroupScore],
    config: &SelectionConfig,
) -> Result<SelectionPlan> {
    let ranked = select_groups(sorted_scores, config)?;
    let mut selected = ranked;
    selected.sort_unstable(); // group index order is temporal order

    let groups: Vec<&FrameGroup> = selected
        .iter()
        .map(|&g| index.group(g))
        .collect::<Result<_>>()?;
    let base_frames_per_group: Vec<usize> = groups.iter().map(|g| g.frame_count()).collect();
    let interval_ms = index.sampling.interval_ms;

    let allocation = if config.strategy == SelectionStrategy::Dynamic {
        let spans: Vec<GroupSpan> = groups
            .iter()
            .map(|g| GroupSpan {
                group_index: g.group_index,
                frame_count: g.frame_count(),
                start_ms: g.start_ms,
            })
            .collect();
        allocate_budget(&spans, config.max_frames, interval_ms)?
    } else {
        let total: usize = base_frames_per_group.iter().sum();
        BudgetAllocation {
            per_group: vec![0; groups.len()],
            over_budget: total > config.max_frames,
        }
    };

    let mut extension_details = vec![GroupExtension::default(); groups.len()];
    if !allocation.over_budget {
        let mut occupied: HashSet<u64> = groups
            .iter()
            .flat_map(|g| g.timestamps())
            .collect();
        for (i, group) in groups.iter().enumerate() {
            let ext = extend_group(
                group,
                allocation.per_group[i],
                interval_ms,
                index.duration_ms,
                &occupied,
            );
            occupied.extend(ext.timestamps());
            extension_details[i] = ext;
        }
    }

    let frames_by_ts = index.frames_by_timestamp();
    let final_frames = assemble_frames(
        &groups,
        &extension_details,
        &frames_by_ts,
        config.max_frames,
    );

    Ok(SelectionPlan {
        selected,
        base_frames_per_group,
        extensions: allocation.per_group,
        extension_timestamps: extension_details
            .into_iter()
            .map(|e| (e.before, e.after))
            .collect(),
        final_frames,
        over_budget: allocation.over_budget,
    })
}

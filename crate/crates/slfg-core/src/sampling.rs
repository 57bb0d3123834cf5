//! Dense timestamp sampling and fixed-granularity frame grouping.
//!
//! Timestamps are held as integer milliseconds throughout so grid arithmetic
//! is exact: equality checks and the window-tiling property would not survive
//! float drift.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The sampling grid: one frame every `interval_ms`, starting at `origin_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub interval_ms: u64,
    pub origin_ms: u64,
}

impl SamplingConfig {
    pub fn new(interval_ms: u64, origin_ms: u64) -> Result<Self> {
        if interval_ms == 0 {
            return Err(Error::invalid_arg("sampling interval must be positive"));
        }
        Ok(Self {
            interval_ms,
            origin_ms,
        })
    }

    /// Quantizes second-valued inputs to the millisecond grid.
    pub fn from_seconds(interval_s: f64, origin_s: f64) -> Result<Self> {
        if !interval_s.is_finite() || interval_s <= 0.0 {
            return Err(Error::invalid_arg(format!(
                "sampling interval must be positive, got {interval_s}"
            )));
        }
        if !origin_s.is_finite() || origin_s < 0.0 {
            return Err(Error::invalid_arg(format!(
                "sampling origin must be non-negative, got {origin_s}"
            )));
        }
        Self::new(seconds_to_ms(interval_s), seconds_to_ms(origin_s))
    }

    pub fn interval_s(&self) -> f64 {
        self.interval_ms as f64 / 1000.0
    }

    pub fn origin_s(&self) -> f64 {
        self.origin_ms as f64 / 1000.0
    }
}

impl Default for SamplingConfig {
    /// 10-second interval starting at zero.
    fn default() -> Self {
        Self {
            interval_ms: 10_000,
            origin_ms: 0,
        }
    }
}

/// Rounds a second value to the nearest millisecond.
pub fn seconds_to_ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round().max(0.0) as u64
}

/// Opaque locator for a frame image: usually a file path, but any stable
/// string handle works (mock backends never touch the filesystem).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageRef(String);

impl ImageRef {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn from_path(path: &Path) -> Self {
        Self(path.to_string_lossy().into_owned())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Last path component of the ref, or the whole ref if it has none.
    pub fn basename(&self) -> &str {
        self.0.rsplit(['/', '\\']).next().unwrap_or(&self.0)
    }

    /// Timestamp encoded by the `frame_<t_ms>.jpg` naming convention, if the
    /// ref follows it.
    pub fn timestamp_ms(&self) -> Option<u64> {
        let name = self.basename();
        let rest = name.strip_prefix("frame_")?;
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            return None;
        }
        digits.parse().ok()
    }
}

impl std::fmt::Display for ImageRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One sampled frame: its sample index, grid timestamp, and image locator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub index: usize,
    pub timestamp_ms: u64,
    pub image_ref: ImageRef,
}

impl Frame {
    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_ms as f64 / 1000.0
    }
}

/// A run of consecutive sampled frames treated as one unit. The temporal
/// window is `[start_ms, start_ms + frame_count * interval_ms)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGroup {
    pub group_index: usize,
    pub frames: Vec<Frame>,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl FrameGroup {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = u64> + '_ {
        self.frames.iter().map(|f| f.timestamp_ms)
    }

    pub fn start_s(&self) -> f64 {
        self.start_ms as f64 / 1000.0
    }

    pub fn end_s(&self) -> f64 {
        self.end_ms as f64 / 1000.0
    }
}

/// All grid timestamps `origin + i * interval` that do not exceed the video
/// duration. The endpoint is included when it falls exactly on the grid.
pub fn sample_timestamps(duration_ms: u64, config: &SamplingConfig) -> Result<Vec<u64>> {
    if duration_ms == 0 {
        return Err(Error::invalid_arg("video duration must be positive"));
    }
    if config.interval_ms == 0 {
        return Err(Error::invalid_arg("sampling interval must be positive"));
    }
    let mut out = Vec::new();
    let mut t = config.origin_ms;
    while t <= duration_ms {
        out.push(t);
        t += config.interval_ms;
    }
    Ok(out)
}

/// Splits frames into groups of `group_size`. The final group keeps whatever
/// remains (1..=group_size frames) rather than being dropped or padded:
/// discarding the tail would blind the pipeline to video endings.
pub fn group_frames(
    frames: Vec<Frame>,
    group_size: usize,
    config: &SamplingConfig,
) -> Result<Vec<FrameGroup>> {
    if frames.is_empty() {
        return Err(Error::invalid_arg("frame list is empty"));
    }
    if group_size == 0 {
        return Err(Error::invalid_arg("group size must be at least 1"));
    }
    let mut groups = Vec::with_capacity(frames.len().div_ceil(group_size));
    let mut it = frames.into_iter().peekable();
    let mut group_index = 0;
    while it.peek().is_some() {
        let chunk: Vec<Frame> = it.by_ref().take(group_size).collect();
        let (start_ms, end_ms) = window_of(chunk[0].timestamp_ms, chunk.len(), config);
        groups.push(FrameGroup {
            group_index,
            frames: chunk,
            start_ms,
            end_ms,
        });
        group_index += 1;
    }
    Ok(groups)
}

/// The temporal window of a group: starts at its first frame and spans one
/// full interval per frame.
pub fn group_window(group: &FrameGroup, config: &SamplingConfig) -> (u64, u64) {
    window_of(
        group.frames[0].timestamp_ms,
        group.frames.len(),
        config,
    )
}

fn window_of(start_ms: u64, frame_count: usize, config: &SamplingConfig) -> (u64, u64) {
    (
        start_ms,
        start_ms + frame_count as u64 * config.interval_ms,
    )
}

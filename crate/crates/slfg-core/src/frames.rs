//! Frame directories: the on-disk form a video takes before indexing.
//!
//! A frame directory holds one JPEG per sampled timestamp, named
//! `frame_<t_ms:08>.jpg`, plus a `manifest.json` listing the video id,
//! duration, extraction interval, and every frame timestamp. The pipeline
//! only ever reads frame directories; populating one from a video file is
//! done by [`ingest_video`], which shells out to ffmpeg.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{sample_timestamps, seconds_to_ms, Frame, ImageRef, SamplingConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

/// File name for the frame at `t_ms`, zero-padded to at least eight digits.
pub fn frame_file_name(t_ms: u64) -> String {
    format!("frame_{t_ms:08}.jpg")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub video_id: String,
    pub duration_s: f64,
    pub interval_s: f64,
    /// Timestamps (ms) of every extracted frame.
    pub frames: Vec<u64>,
}

impl FrameManifest {
    pub fn duration_ms(&self) -> u64 {
        seconds_to_ms(self.duration_s)
    }
}

/// An opened frame directory with a validated manifest.
#[derive(Debug, Clone)]
pub struct FrameDir {
    root: PathBuf,
    manifest: FrameManifest,
}

impl FrameDir {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| {
            Error::Ingest(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        let manifest: FrameManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Ingest(format!("invalid manifest {}: {e}", path.display())))?;
        if manifest.video_id.is_empty() {
            return Err(Error::Ingest(format!(
                "manifest {} has an empty video_id",
                path.display()
            )));
        }
        Ok(Self { root, manifest })
    }

    pub fn create(root: impl Into<PathBuf>, manifest: FrameManifest) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let path = root.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())?;
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &FrameManifest {
        &self.manifest
    }

    pub fn video_id(&self) -> &str {
        &self.manifest.video_id
    }

    pub fn duration_ms(&self) -> u64 {
        self.manifest.duration_ms()
    }

    pub fn frame_path(&self, t_ms: u64) -> PathBuf {
        self.root.join(frame_file_name(t_ms))
    }

    /// Frames for every timestamp on the sampling grid. Fails if the manifest
    /// or the files on disk do not cover the grid, naming the missing t_ms.
    pub fn resolve_frames(&self, sampling: &SamplingConfig) -> Result<Vec<Frame>> {
        let timestamps = sample_timestamps(self.duration_ms(), sampling)?;
        let listed: BTreeSet<u64> = self.manifest.frames.iter().copied().collect();
        let missing: Vec<u64> = timestamps
            .iter()
            .copied()
            .filter(|t| !listed.contains(t) || !self.frame_path(*t).is_file())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFrames {
                dir: self.root.clone(),
                missing,
            });
        }
        Ok(timestamps
            .into_iter()
            .enumerate()
            .map(|(index, t_ms)| Frame {
                index,
                timestamp_ms: t_ms,
                image_ref: ImageRef::from_path(&self.frame_path(t_ms)),
            })
            .collect())
    }
}

/// Builds a manifest for a directory that already contains `frame_*.jpg`
/// files, inferring the interval from the smallest gap unless given.
pub fn synthesize_manifest(
    dir: &Path,
    video_id: &str,
    interval_s: Option<f64>,
) -> Result<FrameDir> {
    let mut timestamps: Vec<u64> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let r = ImageRef::new(name.to_string_lossy().into_owned());
        if let Some(t) = r.timestamp_ms() {
            timestamps.push(t);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::Ingest(format!(
            "no frame_<t_ms>.jpg files found in {}",
            dir.display()
        )));
    }
    timestamps.sort_unstable();
    timestamps.dedup();
    let inferred = timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .unwrap_or(10_000);
    let interval_s = interval_s.unwrap_or(inferred as f64 / 1000.0);
    let manifest = FrameManifest {
        video_id: video_id.to_string(),
        duration_s: *timestamps.last().unwrap() as f64 / 1000.0,
        interval_s,
        frames: timestamps,
    };
    FrameDir::create(dir, manifest)
}

/// True if `tool` resolves to a file through PATH.
pub fn tool_on_path(tool: &str) -> bool {
    let Some(paths) = std::env::var_os("PATH") else {
        return false;
    };
    std::env::split_paths(&paths).any(|dir| dir.join(tool).is_file())
}

/// Extracts one frame per interval from a video file into `out_dir` using
/// ffmpeg, then writes the manifest. The frame at index i is labeled with
/// t = i * interval on the sampling grid.
pub fn ingest_video(
    video: &Path,
    out_dir: &Path,
    video_id: &str,
    interval_s: f64,
) -> Result<FrameDir> {
    if !interval_s.is_finite() || interval_s <= 0.0 {
        return Err(Error::invalid_arg("ingest interval must be positive"));
    }
    if !video.is_file() {
        return Err(Error::Ingest(format!(
            "input video {} is not a readable file",
            video.display()
        )));
    }
    if !tool_on_path("ffmpeg") {
        return Err(Error::ToolMissing {
            tool: "ffmpeg".to_string(),
        });
    }
    fs::create_dir_all(out_dir)?;

    let pattern = out_dir.join("ingest_%08d.jpg");
    let output = Command::new("ffmpeg")
        .arg("-hide_banner")
        .arg("-y")
        .arg("-i")
        .arg(video)
        .arg("-vf")
        .arg(format!("fps=1/{interval_s}"))
        .arg("-start_number")
        .arg("0")
        .arg(&pattern)
        .output()
        .map_err(|e| Error::Ingest(format!("failed to run ffmpeg: {e}")))?;
    if !output.status.success() {
        return Err(Error::ExtractionFailed {
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }

    // Relabel the sequentially numbered outputs onto the millisecond grid.
    let interval_ms = seconds_to_ms(interval_s);
    let mut timestamps = Vec::new();
    for i in 0u64.. {
        let src = out_dir.join(format!("ingest_{i:08}.jpg"));
        if !src.is_file() {
            break;
        }
        let t_ms = i * interval_ms;
        fs::rename(&src, out_dir.join(frame_file_name(t_ms)))?;
        timestamps.push(t_ms);
    }
    if timestamps.is_empty() {
        return Err(Error::ExtractionFailed {
            stderr: "ffmpeg produced no frames".to_string(),
        });
    }

    let duration_s = probe_duration(video)
        .unwrap_or_else(|| *timestamps.last().unwrap() as f64 / 1000.0);
    let manifest = FrameManifest {
        video_id: video_id.to_string(),
        duration_s,
        interval_s,
        frames: timestamps,
    };
    FrameDir::create(out_dir, manifest)
}

fn probe_duration(video: &Path) -> Option<f64> {
    if !tool_on_path("ffprobe") {
        tracing::warn!("ffprobe not found; using the last extracted frame as the duration");
        return None;
    }
    let output = Command::new("ffprobe")
        .args(["-v", "error", "-show_entries", "format=duration", "-of"])
        .arg("default=noprint_wrappers=1:nokey=1")
        .arg(video)
        .output()
        .ok()?;
    String::from_utf8_lossy(&output.stdout).trim().parse().ok()
}

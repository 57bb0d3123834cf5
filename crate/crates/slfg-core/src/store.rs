//! Disk persistence for scene indexes.
//!
//! One self-describing JSON document per index at
//! `{root}/{video_id}/{hash(key)}.json`, embeddings inline. Writes go
//! through a temp file and an atomic rename, so concurrent writers to the
//! same key serialize to last-writer-wins and readers never see a torn file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hashing::fnv1a64;
use crate::indexing::SceneIndex;

/// Bump when the on-disk layout changes. Files with a newer version than
/// this fail loudly instead of being misread.
pub const SCHEMA_VERSION: u32 = 1;

/// Identity of a stored index. Two keys are equal iff all six fields are
/// equal; an index built with a different model is semantically stale, so
/// model identifiers participate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexKey {
    pub video_id: String,
    pub interval_ms: u64,
    pub group_size: usize,
    pub describer_id: String,
    pub abstractor_id: String,
    pub embedder_id: String,
}

impl IndexKey {
    pub fn path_under(&self, root: &Path) -> PathBuf {
        root.join(&self.video_id)
            .join(format!("{}.json", self.file_stem()))
    }

    fn file_stem(&self) -> String {
        let canonical = format!(
            "{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}",
            self.video_id,
            self.interval_ms,
            self.group_size,
            self.describer_id,
            self.abstractor_id,
            self.embedder_id
        );
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    schema_version: u32,
    index: SceneIndex,
}

/// Writes the index under its key's path, atomically. Saving the same index
/// twice replaces the file with identical content.
pub fn save_index(index: &SceneIndex, root: &Path) -> Result<PathBuf> {
    index.validate()?;
    let path = index.key().path_under(root);
    let parent = path.parent().expect("key path has a parent");
    fs::create_dir_all(parent).map_err(|e| Error::Storage {
        path: parent.to_path_buf(),
        source: e,
    })?;

    let file = IndexFile {
        schema_version: SCHEMA_VERSION,
        index: index.clone(),
    };
    let body = serde_json::to_string_pretty(&file).expect("index serializes");
    let tmp = parent.join(format!(
        ".{}.tmp{}",
        path.file_name().unwrap().to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, body).map_err(|e| Error::Storage {
        path: tmp.clone(),
        source: e,
    })?;
    fs::rename(&tmp, &path).map_err(|e| Error::Storage {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

/// Loads the index stored under `key`, or `None` when nothing matches.
/// A file that exists but cannot be read as an index is an error, not a
/// miss: silently rebuilding over a corrupt artifact would hide the damage.
pub fn load_index(key: &IndexKey, root: &Path) -> Result<Option<SceneIndex>> {
    let path = key.path_under(root);
    let text = match fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::Storage { path, source: e }),
    };

    let value: Value = serde_json::from_str(&text).map_err(|e| Error::CorruptIndex {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    let found = value
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::CorruptIndex {
            path: path.clone(),
            detail: "missing schema_version".into(),
        })? as u32;
    if found > SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path,
            found,
            supported: SCHEMA_VERSION,
        });
    }

    let file: IndexFile = serde_json::from_value(value).map_err(|e| Error::CorruptIndex {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    file.index.validate().map_err(|e| Error::CorruptIndex {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    if file.index.key() != *key {
        return Ok(None);
    }
    Ok(Some(file.index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{frame_file_name, FrameDir, FrameManifest};
    use crate::gateway::mock::MockGateway;
    use crate::gateway::prompts::PromptSet;
    use crate::indexing::build_index;
    use crate::sampling::SamplingConfig;

    fn sample_index(tmp: &Path) -> SceneIndex {
        let dir = tmp.join("frames").join("vid");
        std::fs::create_dir_all(&dir).unwrap();
        let ts: Vec<u64> = (0..20).map(|i| i * 10_000).collect();
        for &t in &ts {
            std::fs::write(dir.join(frame_file_name(t)), [0xFF]).unwrap();
        }
        let fd = FrameDir::create(
            &dir,
            FrameManifest {
                video_id: "vid".into(),
                duration_s: 190.0,
                interval_s: 10.0,
                frames: ts,
            },
        )
        .unwrap();
        let sampling = SamplingConfig::new(10_000, 0).unwrap();
        build_index(&fd, &sampling, 16, &MockGateway::new(), &PromptSet::builtin()).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let index = sample_index(tmp.path());
        let root = tmp.path().join("store");
        let path = save_index(&index, &root).unwrap();
        assert!(path.is_file());
        let loaded = load_index(&index.key(), &root).unwrap().unwrap();
        assert_eq!(loaded, index);
    }

    #[test]
    fn second_save_is_idempotent() {
        let tmp = tempfile::tempdir().unwrap();
        let index = sample_index(tmp.path());
        let root = tmp.path().join("store");
        let p1 = save_index(&index, &root).unwrap();
        let first = std::fs::read_to_string(&p1).unwrap();
        let p2 = save_index(&index, &root).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(std::fs::read_to_string(&p2).unwrap(), first);
    }

    #[test]
    fn key_mismatch_is_a_miss() {
        let tmp = tempfile::tempdir().unwrap();
        let index = sample_index(tmp.path());
        let root = tmp.path().join("store");
        save_index(&index, &root).unwrap();

        let mut other = index.key();
        other.group_size = 8;
        assert!(load_index(&other, &root).unwrap().is_none());

        let mut other = index.key();
        other.embedder_id = "different-embedder".into();
        assert!(load_index(&other, &root).unwrap().is_none());
    }

    #[test]
    fn truncated_file_is_corrupt_not_a_miss() {
        let tmp = tempfile::tempdir().unwrap();
        let index = sample_index(tmp.path());
        let root = tmp.path().join("store");
        let path = save_index(&index, &root).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();

        let err = load_index(&index.key(), &root).unwrap_err();
        match err {
            Error::CorruptIndex { path: p, .. } => assert_eq!(p, path),
            other => panic!("expected CorruptIndex, got {other:?}"),
        }
    }

    #[test]
    fn newer_schema_fails_loudly() {
        let tmp = tempfile::tempdir().unwrap();
        let index = sample_index(tmp.path());
        let root = tmp.path().join("store");
        let path = save_index(&index, &root).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let bumped = text.replacen(
            &format!("\"schema_version\": {SCHEMA_VERSION}"),
            &format!("\"schema_version\": {}", SCHEMA_VERSION + 1),
            1,
        );
        assert_ne!(text, bumped, "substitution must hit");
        std::fs::write(&path, bumped).unwrap();

        let err = load_index(&index.key(), &root).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found, .. } if found == SCHEMA_VERSION + 1));
    }

    #[test]
    fn unwritable_root_is_a_storage_error() {
        // A plain file where the root directory should be: directory
        // creation under it fails for any user, root included.
        let tmp = tempfile::tempdir().unwrap();
        let index = sample_index(tmp.path());
        let root = tmp.path().join("occupied");
        std::fs::write(&root, b"not a directory").unwrap();

        let result = save_index(&index, &root);
        assert!(matches!(result, Err(Error::Storage { .. })));
    }
}

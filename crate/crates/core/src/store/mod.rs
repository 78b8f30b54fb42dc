//! File-per-video catalog on disk.
//!
//! ```text
//! <root>/videos/<id>/manifest.json
//! <root>/videos/<id>/personas.json
//! <root>/videos/<id>/track.json
//! <root>/videos/<id>/schedule.json
//! <root>/jobs/<job-id>.json
//! <root>/cache/<stage>/<key>.txt
//! ```
//!
//! Every write goes to a temporary file in the target directory and is renamed
//! into place. Writers to one video serialize on an advisory lock file.

pub mod interop;

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use thiserror::Error;

use crate::danmaku::DanmakuTrack;
use crate::persona::{parse_personas, PersonaSet};
use crate::scheduler::LaneAssignment;
use crate::video_model::VideoManifest;

pub use interop::{export_interop_xml, import_interop_xml, ImportWarning, ImportWarningKind, Imported, InteropError};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("invalid id {0:?}")]
    InvalidId(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Holds the per-video advisory lock until dropped.
#[derive(Debug)]
pub struct VideoLock {
    _file: File,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    root: PathBuf,
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
        && !id.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

/// Writes `bytes` to `path` through a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Hex SHA-256 of a manifest's canonical JSON; used as a cache key.
pub fn manifest_hash(manifest: &VideoManifest) -> String {
    hex::encode(Sha256::digest(manifest.to_json().as_bytes()))
}

impl Catalog {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("videos"))?;
        fs::create_dir_all(root.join("jobs"))?;
        Ok(Catalog { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn video_dir(&self, video_id: &str) -> PathBuf {
        self.root.join("videos").join(video_id)
    }

    fn video_file(&self, video_id: &str, name: &str) -> Result<PathBuf, StoreError> {
        check_id(video_id)?;
        Ok(self.video_dir(video_id).join(name))
    }

    /// Blocks until this caller is the only writer for `video_id`.
    pub fn lock_video(&self, video_id: &str) -> Result<VideoLock, StoreError> {
        check_id(video_id)?;
        let dir = self.video_dir(video_id);
        fs::create_dir_all(&dir)?;
        let file = File::options().create(true).truncate(false).write(true).open(dir.join(".lock"))?;
        file.lock()?;
        Ok(VideoLock { _file: file })
    }

    /// Ids of videos that have a manifest, sorted.
    pub fn list_videos(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("videos"))? {
            let entry = entry?;
            if entry.path().join("manifest.json").is_file() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }

    fn read(&self, path: &Path, what: &str) -> Result<String, StoreError> {
        match fs::read_to_string(path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::NotFound(what.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    fn corrupt(path: &Path, reason: impl ToString) -> StoreError {
        StoreError::Corrupt { path: path.to_path_buf(), reason: reason.to_string() }
    }

    pub fn save_manifest(&self, manifest: &VideoManifest) -> Result<(), StoreError> {
        let path = self.video_file(&manifest.id, "manifest.json")?;
        write_atomic(&path, manifest.to_json().as_bytes())?;
        Ok(())
    }

    pub fn load_manifest(&self, video_id: &str) -> Result<VideoManifest, StoreError> {
        let path = self.video_file(video_id, "manifest.json")?;
        let text = self.read(&path, &format!("video {video_id}"))?;
        let m = VideoManifest::from_json(&text).map_err(|e| Self::corrupt(&path, e))?;
        m.validate().map_err(|e| Self::corrupt(&path, e))?;
        Ok(m)
    }

    pub fn save_personas(&self, personas: &PersonaSet) -> Result<(), StoreError> {
        let path = self.video_file(&personas.video_id, "personas.json")?;
        write_atomic(&path, personas.to_json_pretty().as_bytes())?;
        Ok(())
    }

    pub fn load_personas(&self, video_id: &str) -> Result<PersonaSet, StoreError> {
        let path = self.video_file(video_id, "personas.json")?;
        let text = self.read(&path, &format!("personas for {video_id}"))?;
        parse_personas(&text, video_id).map_err(|e| Self::corrupt(&path, e))
    }

    /// Takes the video lock, then writes. The track must satisfy its invariants.
    pub fn save_track(&self, track: &DanmakuTrack) -> Result<(), StoreError> {
        let _lock = self.lock_video(&track.video_id)?;
        self.save_track_locked(track)
    }

    /// As [`Catalog::save_track`], for callers already holding the video lock.
    pub fn save_track_locked(&self, track: &DanmakuTrack) -> Result<(), StoreError> {
        let path = self.video_file(&track.video_id, "track.json")?;
        track.check(self.duration_bound(&track.video_id)).map_err(|e| Self::corrupt(&path, e))?;
        let json = serde_json::to_string_pretty(track).map_err(|e| Self::corrupt(&path, e))?;
        write_atomic(&path, json.as_bytes())?;
        Ok(())
    }

    pub fn load_track(&self, video_id: &str) -> Result<DanmakuTrack, StoreError> {
        let path = self.video_file(video_id, "track.json")?;
        let text = self.read(&path, &format!("track for {video_id}"))?;
        let track: DanmakuTrack = serde_json::from_str(&text).map_err(|e| Self::corrupt(&path, e))?;
        if track.video_id != video_id {
            return Err(Self::corrupt(&path, format!("track belongs to {}", track.video_id)));
        }
        track.check(self.duration_bound(video_id)).map_err(|e| Self::corrupt(&path, e))?;
        Ok(track)
    }

    fn duration_bound(&self, video_id: &str) -> f64 {
        self.load_manifest(video_id).map_or(f64::MAX, |m| m.duration_s)
    }

    pub fn save_schedule(&self, video_id: &str, schedule: &[LaneAssignment]) -> Result<(), StoreError> {
        let path = self.video_file(video_id, "schedule.json")?;
        write_atomic(&path, crate::scheduler::schedule_to_json(schedule).as_bytes())?;
        Ok(())
    }

    pub fn load_schedule(&self, video_id: &str) -> Result<Vec<LaneAssignment>, StoreError> {
        let path = self.video_file(video_id, "schedule.json")?;
        let text = self.read(&path, &format!("schedule for {video_id}"))?;
        crate::scheduler::schedule_from_json(&text).map_err(|e| Self::corrupt(&path, e))
    }

    pub fn save_job<T: Serialize>(&self, job_id: &str, job: &T) -> Result<(), StoreError> {
        check_id(job_id)?;
        let path = self.root.join("jobs").join(format!("{job_id}.json"));
        let json = serde_json::to_string_pretty(job).map_err(|e| Self::corrupt(&path, e))?;
        write_atomic(&path, json.as_bytes())?;
        Ok(())
    }

    pub fn load_job<T: DeserializeOwned>(&self, job_id: &str) -> Result<T, StoreError> {
        check_id(job_id)?;
        let path = self.root.join("jobs").join(format!("{job_id}.json"));
        let text = self.read(&path, &format!("job {job_id}"))?;
        serde_json::from_str(&text).map_err(|e| Self::corrupt(&path, e))
    }

    fn cache_path(&self, stage: &str, key: &str) -> Result<PathBuf, StoreError> {
        check_id(stage)?;
        check_id(key)?;
        Ok(self.root.join("cache").join(stage).join(format!("{key}.txt")))
    }

    /// Cached raw model output for a pipeline stage.
    pub fn cache_get(&self, stage: &str, key: &str) -> Result<Option<String>, StoreError> {
        let path = self.cache_path(stage, key)?;
        match fs::read_to_string(path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn cache_put(&self, stage: &str, key: &str, text: &str) -> Result<(), StoreError> {
        let path = self.cache_path(stage, key)?;
        write_atomic(&path, text.as_bytes())?;
        Ok(())
    }
}

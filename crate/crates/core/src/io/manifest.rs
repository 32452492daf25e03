//! Episode manifests: one JSON object per line. Fields this crate does not
//! know about are kept and written back unchanged.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::StorageError;
use crate::event::SensorGeometry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t_exposure_end_us: u64,
    pub image_path: String,
    pub exposure_ms: f64,
    pub light_scale: f64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Raw joint readings of a 6-DoF arm. Units are declared by the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub t_us: u64,
    pub joint_positions: [f64; 6],
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeManifest {
    pub episode_id: String,
    pub geometry: SensorGeometry,
    pub frames: Vec<FrameRecord>,
    pub events_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<ActionRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_units: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl EpisodeManifest {
    pub fn new(episode_id: impl Into<String>, geometry: SensorGeometry, events_path: impl Into<String>) -> Self {
        Self {
            episode_id: episode_id.into(),
            geometry,
            frames: Vec::new(),
            events_path: events_path.into(),
            actions: None,
            action_units: None,
            extra: Map::new(),
        }
    }

    fn check_frames(&self, line: usize) -> Result<(), StorageError> {
        for (index, pair) in self.frames.windows(2).enumerate() {
            if pair[1].t_exposure_end_us <= pair[0].t_exposure_end_us {
                return Err(StorageError::NonMonotoneFrames { line, index: index + 1 });
            }
        }
        Ok(())
    }

    /// Every path this episode references, resolved against `base`.
    pub fn referenced_paths(&self, base: &Path) -> Vec<PathBuf> {
        std::iter::once(&self.events_path)
            .chain(self.frames.iter().map(|f| &f.image_path))
            .map(|p| base.join(p))
            .collect()
    }
}

fn to_line(m: &EpisodeManifest) -> Result<String, StorageError> {
    m.check_frames(0)?;
    let mut s = serde_json::to_string(m).map_err(|e| StorageError::MalformedRecord { line: 0, message: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

pub fn write_manifest(path: impl AsRef<Path>, episodes: &[EpisodeManifest]) -> Result<(), StorageError> {
    let mut out = String::new();
    for m in episodes {
        out.push_str(&to_line(m)?);
    }
    std::fs::write(path, out).map_err(StorageError::SinkFailure)
}

/// Adds one episode line to the end of the file, creating it if needed.
pub fn append_manifest(path: impl AsRef<Path>, episode: &EpisodeManifest) -> Result<(), StorageError> {
    let line = to_line(episode)?;
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(StorageError::SinkFailure)?;
    f.write_all(line.as_bytes()).map_err(StorageError::SinkFailure)
}

/// Reads every episode. Relative file references resolve against the
/// manifest's directory and must exist.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<EpisodeManifest>, StorageError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(StorageError::Source)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut episodes = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let m: EpisodeManifest =
            serde_json::from_str(raw).map_err(|e| StorageError::MalformedRecord { line, message: e.to_string() })?;
        m.check_frames(line)?;
        for p in m.referenced_paths(base) {
            if !p.exists() {
                return Err(StorageError::MissingFile { line, path: p });
            }
        }
        episodes.push(m);
    }
    Ok(episodes)
}

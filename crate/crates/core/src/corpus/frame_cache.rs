use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Interval, LocalId};
use crate::tensor_file::write_atomic;

pub const INDEX_FILE: &str = "index.json";

/// Per-video record of what was decoded into the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameIndex {
    pub local_id: LocalId,
    pub interval: Interval,
    /// Frames the decoder produced for the interval, before standardization.
    pub native_count: usize,
    /// Presentation timestamp of each cached frame, seconds from video start.
    pub timestamps: Vec<f64>,
    pub extracted_at: DateTime<Utc>,
}

/// `<root>/<local_id>/NNNNN.jpg` plus `<root>/<local_id>/index.json`.
#[derive(Debug, Clone)]
pub struct FrameCache {
    root: PathBuf,
}

impl FrameCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn video_dir(&self, id: &LocalId) -> PathBuf {
        self.root.join(id.as_str())
    }

    pub fn frame_path(&self, id: &LocalId, n: usize) -> PathBuf {
        self.video_dir(id).join(format!("{n:05}.jpg"))
    }

    pub fn index_path(&self, id: &LocalId) -> PathBuf {
        self.video_dir(id).join(INDEX_FILE)
    }

    /// Replaces any cached frames for the video with `frames`, numbered from 0
    /// in interval order, and writes the index last.
    pub fn store(&self, index: &FrameIndex, frames: &[RgbImage]) -> Result<(), CorpusError> {
        let dir = self.video_dir(&index.local_id);
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (n, frame) in frames.iter().enumerate() {
            let path = self.frame_path(&index.local_id, n);
            frame.save(&path).map_err(|e| CorpusError::Io {
                path: path.clone(),
                source: std::io::Error::other(e),
            })?;
        }
        let path = self.index_path(&index.local_id);
        let json = serde_json::to_vec_pretty(index).expect("index serializes");
        write_atomic(&path, &json).map_err(io_err(&path))
    }

    pub fn load_index(&self, id: &LocalId) -> Result<Option<FrameIndex>, CorpusError> {
        let path = self.index_path(id);
        if !path.exists() {
            return Ok(None);
        }
        let raw = fs::read(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        serde_json::from_slice(&raw)
            .map(Some)
            .map_err(|e| CorpusError::Parse {
                path,
                line: e.line(),
                message: e.to_string(),
            })
    }

    pub fn load_frame(&self, id: &LocalId, n: usize) -> Result<RgbImage, CorpusError> {
        let path = self.frame_path(id, n);
        image::open(&path)
            .map(|img| img.to_rgb8())
            .map_err(|e| CorpusError::Io {
                path,
                source: std::io::Error::other(e),
            })
    }
}

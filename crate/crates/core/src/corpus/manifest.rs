use std::collections::HashSet;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::interval::{assign_irrelevant_interval, validate_interval, IntervalError, IntervalViolation};
use super::{Interval, Label, LocalId};
use crate::acquisition::AnonymizedRecord;
use crate::tensor_file::write_atomic;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown video id {0}")]
    UnknownId(LocalId),
    #[error("duplicate video id {0}")]
    DuplicateId(LocalId),
    #[error("manifest schema version {found} is not supported (this build reads version {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("interval rejected for {id}: {violation}")]
    IntervalRejected {
        id: LocalId,
        violation: IntervalViolation,
    },
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("{id} is labeled {actual:?}, operation requires {required}")]
    WrongLabel {
        id: LocalId,
        actual: Option<Label>,
        required: Label,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVideo {
    pub record: AnonymizedRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    /// Set when the video was too short for a full machine-assigned interval.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short_interval: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<u64>,
    pub version: u64,
}

impl LabeledVideo {
    pub fn new(record: AnonymizedRecord) -> Self {
        Self {
            record,
            label: None,
            interval: None,
            short_interval: false,
            frame_count: None,
            version: 0,
        }
    }

    pub fn local_id(&self) -> &LocalId {
        &self.record.local_id
    }

    /// Labeled and carrying an interval, i.e. ready for frame extraction.
    pub fn is_complete(&self) -> bool {
        self.label.is_some() && self.interval.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub irrelevant: usize,
    pub relevant: usize,
    pub unlabeled: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.irrelevant + self.relevant + self.unlabeled
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
}

/// Ordered collection of labeled videos with unique local ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    videos: Vec<LabeledVideo>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self::new()
    }
}

impl Manifest {
    pub fn new() -> Self {
        Self { videos: Vec::new() }
    }

    pub fn schema_version(&self) -> u32 {
        MANIFEST_SCHEMA_VERSION
    }

    pub fn videos(&self) -> &[LabeledVideo] {
        &self.videos
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn get(&self, id: &LocalId) -> Option<&LabeledVideo> {
        self.videos.iter().find(|v| v.local_id() == id)
    }

    fn get_mut(&mut self, id: &LocalId) -> Result<&mut LabeledVideo, CorpusError> {
        self.videos
            .iter_mut()
            .find(|v| v.local_id() == id)
            .ok_or_else(|| CorpusError::UnknownId(id.clone()))
    }

    pub fn insert(&mut self, record: AnonymizedRecord) -> Result<&LabeledVideo, CorpusError> {
        if self.get(&record.local_id).is_some() {
            return Err(CorpusError::DuplicateId(record.local_id));
        }
        self.videos.push(LabeledVideo::new(record));
        Ok(self.videos.last().expect("just pushed"))
    }

    /// Sets the label. Changing the label discards the interval, since a
    /// relevant interval is human-marked and an irrelevant one is machine-placed.
    pub fn upsert_label(&mut self, id: &LocalId, label: Label) -> Result<&LabeledVideo, CorpusError> {
        let video = self.get_mut(id)?;
        if video.label != Some(label) {
            video.interval = None;
            video.short_interval = false;
        }
        video.label = Some(label);
        video.version += 1;
        Ok(video)
    }

    /// Records a human-marked occurrence interval on a relevant video.
    pub fn set_interval(&mut self, id: &LocalId, interval: Interval) -> Result<&LabeledVideo, CorpusError> {
        let video = self.get_mut(id)?;
        let label = video.label.ok_or(CorpusError::WrongLabel {
            id: id.clone(),
            actual: None,
            required: Label::Relevant,
        })?;
        validate_interval(label, &interval).map_err(|violation| CorpusError::IntervalRejected {
            id: id.clone(),
            violation,
        })?;
        video.interval = Some(interval);
        video.short_interval = false;
        video.version += 1;
        Ok(video)
    }

    /// Places the random 15 s interval on an irrelevant video.
    pub fn assign_machine_interval(&mut self, id: &LocalId, seed: u64) -> Result<&LabeledVideo, CorpusError> {
        let video = self.get_mut(id)?;
        if video.label != Some(Label::Irrelevant) {
            return Err(CorpusError::WrongLabel {
                id: id.clone(),
                actual: video.label,
                required: Label::Irrelevant,
            });
        }
        let assigned = assign_irrelevant_interval(video.record.duration_s, seed)?;
        video.interval = Some(assigned.interval);
        video.short_interval = assigned.short;
        video.version += 1;
        Ok(video)
    }

    pub fn set_frame_count(&mut self, id: &LocalId, count: u64) -> Result<&LabeledVideo, CorpusError> {
        let video = self.get_mut(id)?;
        video.frame_count = Some(count);
        video.version += 1;
        Ok(video)
    }

    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = ClassCounts::default();
        for v in &self.videos {
            match v.label {
                Some(Label::Irrelevant) => counts.irrelevant += 1,
                Some(Label::Relevant) => counts.relevant += 1,
                None => counts.unlabeled += 1,
            }
        }
        counts
    }

    /// Newline-delimited JSON: a header line then one video per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = serde_json::to_string(&Header {
            schema_version: MANIFEST_SCHEMA_VERSION,
        })
        .expect("header serializes");
        out.push('\n');
        for v in &self.videos {
            out.push_str(&serde_json::to_string(v).expect("video serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_atomic(path, self.to_ndjson().as_bytes()).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::open(path).map_err(io_err)?;
        Self::from_reader(BufReader::new(file), path)
    }

    /// Loads `path`, or returns an empty manifest when the file does not exist.
    pub fn load_or_default(path: &Path) -> Result<Self, CorpusError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    fn from_reader(reader: impl BufRead, path: &Path) -> Result<Self, CorpusError> {
        let parse_err = |line: usize, message: String| CorpusError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let header_line = loop {
            match lines.next() {
                Some((_, Ok(l))) if l.trim().is_empty() => continue,
                Some((i, Ok(l))) => break (i + 1, l),
                Some((_, Err(source))) => {
                    return Err(CorpusError::Io {
                        path: path.to_path_buf(),
                        source,
                    })
                }
                None => return Err(parse_err(1, "missing header line".into())),
            }
        };
        let header: Header =
            serde_json::from_str(&header_line.1).map_err(|e| parse_err(header_line.0, e.to_string()))?;
        if header.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CorpusError::SchemaVersion {
                found: header.schema_version,
                supported: MANIFEST_SCHEMA_VERSION,
            });
        }

        let mut seen = HashSet::new();
        let mut videos = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|source| CorpusError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let video: LabeledVideo = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            if !seen.insert(video.local_id().clone()) {
                return Err(CorpusError::DuplicateId(video.local_id().clone()));
            }
            videos.push(video);
        }
        Ok(Self { videos })
    }
}

//! The labeled dataset: manifest of anonymized videos with class labels and
//! occurrence intervals, plus the on-disk frame cache layout.

mod frame_cache;
mod interval;
mod lock;
mod manifest;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use frame_cache::{FrameCache, FrameIndex};
pub use interval::{
    assign_irrelevant_interval, validate_interval, AssignedInterval, Interval, IntervalError,
    IntervalViolation, IRRELEVANT_INTERVAL_S, RELEVANT_MAX_S, RELEVANT_MIN_S,
};
pub use lock::{CorpusLock, LockError};
pub use manifest::{
    ClassCounts, CorpusError, LabeledVideo, Manifest, MANIFEST_SCHEMA_VERSION,
};

/// Class label. Index 0 is irrelevant and 1 is relevant everywhere: in
/// network outputs, confusion matrices and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Irrelevant = 0,
    Relevant = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Irrelevant, Label::Relevant];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Irrelevant),
            1 => Some(Label::Relevant),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Irrelevant => "irrelevant",
            Label::Relevant => "relevant",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "irrelevant" | "0" => Ok(Label::Irrelevant),
            "relevant" | "1" => Ok(Label::Relevant),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Corpus-local video identifier, `vid_` followed by a zero-padded counter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocalId(String);

impl LocalId {
    /// `vid_NNNN`; the padding is a minimum width, so 12345 becomes `vid_12345`.
    pub fn from_counter(counter: u64) -> Self {
        LocalId(format!("vid_{counter:04}"))
    }

    pub fn new(s: impl Into<String>) -> Self {
        LocalId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The counter this id was built from, if it has the canonical form.
    pub fn counter(&self) -> Option<u64> {
        self.0.strip_prefix("vid_")?.parse().ok()
    }
}

impl fmt::Display for LocalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LocalId {
    fn from(s: &str) -> Self {
        LocalId(s.to_owned())
    }
}

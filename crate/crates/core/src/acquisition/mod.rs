//! Candidate discovery through the YouTube Data API v3 and anonymization of
//! everything that comes back before it reaches the corpus.
//!
//! Only the local id, duration, retrieval time and query survive into the
//! shareable manifest. The platform id is kept in a separate private map
//! (`local_id<TAB>platform_video_id` lines) that is used only to fetch content.

mod anonymize;
mod client;
mod fetch;
mod iso8601;
mod private_map;
mod ratelimit;

use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LocalId;

pub use anonymize::Anonymizer;
pub use client::{
    Credentials, Endpoint, FixtureTransport, HttpReply, ReqwestTransport, SearchClient, Transport,
    API_KEY_ENV, DEFAULT_BASE_URL,
};
pub use fetch::fetch_video;
pub use iso8601::parse_duration;
pub use private_map::{PrivateMap, PrivateMapEntry};
pub use ratelimit::{Clock, RateLimiter, SimClock, SystemClock};

pub const MAX_RESULTS_PER_PAGE: u32 = 50;

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("quota exceeded: {message}")]
    QuotaExceeded {
        message: String,
        retry_after: Option<Duration>,
    },
    #[error("authentication failed (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("network failure: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("unexpected HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("counter {0} already used in this corpus")]
    DuplicateCounter(u64),
    #[error("counter must be positive")]
    ZeroCounter,
    #[error("fetch of {local_id} failed: {message}")]
    Fetch { local_id: LocalId, message: String },
    #[error("private map {path}: {message}")]
    PrivateMap { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchRequest {
    query: String,
    max_results: u32,
    page_token: Option<String>,
}

impl SearchRequest {
    pub fn new(query: impl Into<String>, max_results: u32) -> Result<Self, AcquisitionError> {
        let query = query.into();
        if query.trim().is_empty() {
            return Err(AcquisitionError::InvalidRequest("query must not be empty".into()));
        }
        if !(1..=MAX_RESULTS_PER_PAGE).contains(&max_results) {
            return Err(AcquisitionError::InvalidRequest(format!(
                "max_results {max_results} outside [1, {MAX_RESULTS_PER_PAGE}]"
            )));
        }
        Ok(Self {
            query,
            max_results,
            page_token: None,
        })
    }

    pub fn with_page_token(mut self, token: Option<String>) -> Self {
        self.page_token = token;
        self
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn max_results(&self) -> u32 {
        self.max_results
    }

    pub fn page_token(&self) -> Option<&str> {
        self.page_token.as_deref()
    }
}

/// Video metadata as the platform reports it. Never persisted as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVideoMeta {
    pub platform_video_id: String,
    pub title: String,
    pub duration_s: f64,
    pub published_at: DateTime<Utc>,
    pub channel_ref: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchPage {
    pub items: Vec<RawVideoMeta>,
    pub next_page_token: Option<String>,
}

/// What the corpus keeps about a video. Carries no title, channel or
/// uploader information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizedRecord {
    pub local_id: LocalId,
    pub duration_s: f64,
    pub retrieved_at: DateTime<Utc>,
    pub query: String,
}

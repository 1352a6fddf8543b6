use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::iso8601::parse_duration;
use super::ratelimit::{Clock, RateLimiter, SystemClock};
use super::{AcquisitionError, RawVideoMeta, SearchPage, SearchRequest, MAX_RESULTS_PER_PAGE};

pub const DEFAULT_BASE_URL: &str = "https://www.googleapis.com/youtube/v3";
pub const API_KEY_ENV: &str = "YOUTUBE_API_KEY";

#[derive(Clone)]
pub struct Credentials {
    api_key: String,
}

impl std::fmt::Debug for Credentials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Credentials").field("api_key", &"<redacted>").finish()
    }
}

impl Credentials {
    pub fn new(api_key: impl Into<String>) -> Self {
        Self { api_key: api_key.into() }
    }

    pub fn from_env(var: &str) -> Result<Self, AcquisitionError> {
        match std::env::var(var) {
            Ok(key) if !key.trim().is_empty() => Ok(Self::new(key.trim())),
            _ => Err(AcquisitionError::Auth {
                status: 0,
                message: format!("environment variable {var} is not set"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// `search.list`
    Search,
    /// `videos.list`
    Videos,
}

impl Endpoint {
    fn path(self) -> &'static str {
        match self {
            Endpoint::Search => "search",
            Endpoint::Videos => "videos",
        }
    }
}

#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub retry_after: Option<Duration>,
    pub body: String,
}

pub trait Transport {
    fn get(&self, endpoint: Endpoint, params: &[(&str, String)]) -> Result<HttpReply, AcquisitionError>;
}

/// HTTPS transport against the live API.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
    base_url: String,
}

impl ReqwestTransport {
    pub fn new(base_url: impl Into<String>) -> Result<Self, AcquisitionError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| AcquisitionError::Network(e.to_string()))?;
        Ok(Self {
            client,
            base_url: base_url.into(),
        })
    }
}

impl Transport for ReqwestTransport {
    fn get(&self, endpoint: Endpoint, params: &[(&str, String)]) -> Result<HttpReply, AcquisitionError> {
        let url = format!("{}/{}", self.base_url.trim_end_matches('/'), endpoint.path());
        let resp = self
            .client
            .get(url)
            .query(params)
            .send()
            .map_err(|e| AcquisitionError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = resp.text().map_err(|e| AcquisitionError::Network(e.to_string()))?;
        Ok(HttpReply {
            status,
            retry_after,
            body,
        })
    }
}

/// Serves stored response bodies from a directory:
/// `search.json` for the first page, `search.<pageToken>.json` for later pages,
/// and `videos.json` for detail lookups. A body carrying the API's
/// `{"error": {"code": N, ...}}` shape is returned with status `N`.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn file_for(&self, endpoint: Endpoint, params: &[(&str, String)]) -> PathBuf {
        let token = params.iter().find(|(k, _)| *k == "pageToken").map(|(_, v)| v.as_str());
        match (endpoint, token) {
            (Endpoint::Search, Some(t)) => self.dir.join(format!("search.{t}.json")),
            _ => self.dir.join(format!("{}.json", endpoint.path())),
        }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, endpoint: Endpoint, params: &[(&str, String)]) -> Result<HttpReply, AcquisitionError> {
        let path = self.file_for(endpoint, params);
        let body = fs::read_to_string(&path)
            .map_err(|e| AcquisitionError::Network(format!("{}: {e}", path.display())))?;
        let status = serde_json::from_str::<ErrorEnvelope>(&body)
            .ok()
            .and_then(|e| e.error.code)
            .unwrap_or(200);
        let retry_after = read_retry_after(&path);
        Ok(HttpReply {
            status,
            retry_after,
            body,
        })
    }
}

fn read_retry_after(body_path: &Path) -> Option<Duration> {
    let p = body_path.with_extension("retry-after");
    fs::read_to_string(p).ok()?.trim().parse().ok().map(Duration::from_secs)
}

#[derive(Deserialize)]
struct ErrorEnvelope {
    error: ApiError,
}

#[derive(Deserialize)]
struct ApiError {
    code: Option<u16>,
    #[serde(default)]
    message: String,
    #[serde(default)]
    errors: Vec<ApiErrorItem>,
}

#[derive(Deserialize)]
struct ApiErrorItem {
    #[serde(default)]
    reason: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SearchListResponse {
    next_page_token: Option<String>,
    #[serde(default)]
    items: Vec<SearchResult>,
}

#[derive(Deserialize)]
struct SearchResult {
    id: SearchResultId,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SearchResultId {
    video_id: Option<String>,
}

#[derive(Deserialize)]
struct VideoListResponse {
    #[serde(default)]
    items: Vec<VideoResource>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct VideoResource {
    id: String,
    snippet: VideoSnippet,
    content_details: ContentDetails,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct VideoSnippet {
    published_at: DateTime<Utc>,
    channel_id: String,
    #[serde(default)]
    title: String,
}

#[derive(Deserialize)]
struct ContentDetails {
    duration: String,
}

const QUOTA_REASONS: &[&str] = &[
    "quotaExceeded",
    "dailyLimitExceeded",
    "rateLimitExceeded",
    "userRateLimitExceeded",
];

fn classify_failure(reply: &HttpReply) -> AcquisitionError {
    let (message, reasons) = match serde_json::from_str::<ErrorEnvelope>(&reply.body) {
        Ok(env) => (
            env.error.message,
            env.error.errors.into_iter().map(|e| e.reason).collect::<Vec<_>>(),
        ),
        Err(_) => (reply.body.chars().take(200).collect(), Vec::new()),
    };
    let has = |set: &[&str]| reasons.iter().any(|r| set.contains(&r.as_str()));
    match reply.status {
        429 => AcquisitionError::QuotaExceeded {
            message,
            retry_after: reply.retry_after,
        },
        403 if has(QUOTA_REASONS) => AcquisitionError::QuotaExceeded {
            message,
            retry_after: reply.retry_after,
        },
        401 | 403 => AcquisitionError::Auth {
            status: reply.status,
            message,
        },
        400 if has(&["keyInvalid", "keyExpired"]) => AcquisitionError::Auth {
            status: reply.status,
            message,
        },
        500..=599 => AcquisitionError::Network(format!("HTTP {}: {message}", reply.status)),
        status => AcquisitionError::Http { status, message },
    }
}

fn malformed(what: &str, e: impl std::fmt::Display) -> AcquisitionError {
    AcquisitionError::MalformedResponse(format!("{what}: {e}"))
}

/// Paged search against the platform. Requests are issued sequentially
/// through a token-bucket rate limiter.
pub struct SearchClient<T, C = SystemClock> {
    transport: T,
    credentials: Credentials,
    limiter: RateLimiter<C>,
}

impl<T: Transport, C: Clock> SearchClient<T, C> {
    pub fn new(transport: T, credentials: Credentials, limiter: RateLimiter<C>) -> Self {
        Self {
            transport,
            credentials,
            limiter,
        }
    }

    pub fn limiter(&self) -> &RateLimiter<C> {
        &self.limiter
    }

    fn call(&mut self, endpoint: Endpoint, mut params: Vec<(&str, String)>) -> Result<String, AcquisitionError> {
        params.push(("key", self.credentials.api_key.clone()));
        self.limiter.acquire();
        let reply = self.transport.get(endpoint, &params)?;
        if reply.status != 200 {
            return Err(classify_failure(&reply));
        }
        Ok(reply.body)
    }

    /// One page of results: `search.list` for ids, then `videos.list` for details.
    pub fn search(&mut self, request: &SearchRequest) -> Result<SearchPage, AcquisitionError> {
        let mut params = vec![
            ("part", "id".to_owned()),
            ("type", "video".to_owned()),
            ("q", request.query().to_owned()),
            ("maxResults", request.max_results().to_string()),
        ];
        if let Some(t) = request.page_token() {
            params.push(("pageToken", t.to_owned()));
        }
        let body = self.call(Endpoint::Search, params)?;
        let listing: SearchListResponse = serde_json::from_str(&body).map_err(|e| malformed("search.list", e))?;

        let mut ids: Vec<String> = Vec::new();
        for item in listing.items {
            if let Some(id) = item.id.video_id.filter(|id| !id.is_empty()) {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        ids.truncate(request.max_results() as usize);
        if ids.is_empty() {
            return Ok(SearchPage {
                items: Vec::new(),
                next_page_token: listing.next_page_token.filter(|t| !t.is_empty()),
            });
        }

        let body = self.call(
            Endpoint::Videos,
            vec![("part", "snippet,contentDetails".to_owned()), ("id", ids.join(","))],
        )?;
        let details: VideoListResponse = serde_json::from_str(&body).map_err(|e| malformed("videos.list", e))?;

        let mut items = Vec::with_capacity(ids.len());
        for id in &ids {
            // Videos removed between the two calls are simply absent from details.
            let Some(v) = details.items.iter().find(|v| &v.id == id) else {
                continue;
            };
            let duration_s = parse_duration(&v.content_details.duration)
                .ok_or_else(|| malformed("videos.list", format!("bad duration {:?}", v.content_details.duration)))?;
            items.push(RawVideoMeta {
                platform_video_id: v.id.clone(),
                title: v.snippet.title.clone(),
                duration_s,
                published_at: v.snippet.published_at,
                channel_ref: v.snippet.channel_id.clone(),
            });
        }
        Ok(SearchPage {
            items,
            next_page_token: listing.next_page_token.filter(|t| !t.is_empty()),
        })
    }

    /// Follows page tokens until exhausted or `limit` unique videos are collected.
    pub fn search_all(&mut self, query: &str, limit: usize) -> Result<Vec<RawVideoMeta>, AcquisitionError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut token: Option<String> = None;
        let mut visited_tokens = HashSet::new();
        while out.len() < limit {
            let want = (limit - out.len()).min(MAX_RESULTS_PER_PAGE as usize) as u32;
            let request = SearchRequest::new(query, want)?.with_page_token(token.clone());
            let page = self.search(&request)?;
            for item in page.items {
                if out.len() < limit && seen.insert(item.platform_video_id.clone()) {
                    out.push(item);
                }
            }
            match page.next_page_token {
                Some(t) if visited_tokens.insert(t.clone()) => token = Some(t),
                _ => break,
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::SimClock;
    use super::*;

    fn fixtures(set: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/youtube").join(set)
    }

    fn client(set: &str, rate: f64) -> SearchClient<FixtureTransport, SimClock> {
        SearchClient::new(
            FixtureTransport::new(fixtures(set)),
            Credentials::new("test-key"),
            RateLimiter::new(rate, 1, SimClock::default()),
        )
    }

    #[test]
    fn two_item_page() {
        let mut c = client("two_items", 10.0);
        let page = c.search(&SearchRequest::new("humpback whale", 50).unwrap()).unwrap();
        assert_eq!(page.items.len(), 2);
        assert_eq!(page.items[0].platform_video_id, "dQw4w9WgXcA");
        assert_eq!(page.items[0].duration_s, 253.0);
        assert_eq!(page.items[1].platform_video_id, "kXYiU_JCYtU");
        assert_eq!(page.items[1].duration_s, 61.0);
        assert_eq!(page.items[1].channel_ref, "UCbluewaterchannel00002");
        assert_eq!(page.next_page_token, None);
    }

    #[test]
    fn max_results_caps_items() {
        let mut c = client("two_items", 10.0);
        let page = c.search(&SearchRequest::new("humpback whale", 1).unwrap()).unwrap();
        assert_eq!(page.items.len(), 1);
    }

    #[test]
    fn empty_page() {
        let mut c = client("empty", 10.0);
        let page = c.search(&SearchRequest::new("humpback whale", 50).unwrap()).unwrap();
        assert!(page.items.is_empty());
        assert_eq!(page.next_page_token, None);
    }

    #[test]
    fn quota_exceeded_is_distinct_and_carries_retry_after() {
        let mut c = client("quota", 10.0);
        match c.search(&SearchRequest::new("humpback whale", 50).unwrap()) {
            Err(AcquisitionError::QuotaExceeded { retry_after, message }) => {
                assert_eq!(retry_after, Some(Duration::from_secs(3600)));
                assert!(message.contains("quota"));
            }
            other => panic!("expected quota error, got {other:?}"),
        }
    }

    #[test]
    fn bad_key_is_auth_failure() {
        let mut c = client("bad_key", 10.0);
        assert!(matches!(
            c.search(&SearchRequest::new("humpback whale", 50).unwrap()),
            Err(AcquisitionError::Auth { status: 400, .. })
        ));
    }

    #[test]
    fn garbage_body_is_malformed() {
        let mut c = client("malformed", 10.0);
        assert!(matches!(
            c.search(&SearchRequest::new("humpback whale", 50).unwrap()),
            Err(AcquisitionError::MalformedResponse(_))
        ));
    }

    #[test]
    fn missing_fixture_is_network_failure() {
        let mut c = client("does_not_exist", 10.0);
        assert!(matches!(
            c.search(&SearchRequest::new("humpback whale", 50).unwrap()),
            Err(AcquisitionError::Network(_))
        ));
    }

    #[test]
    fn paging_yields_each_id_once() {
        let mut c = client("paged", 2.0);
        let all = c.search_all("humpback whale", 1000).unwrap();
        let mut ids: Vec<_> = all.iter().map(|m| m.platform_video_id.as_str()).collect();
        assert_eq!(ids.len(), 5);
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 5);
        // 3 pages, each a search.list + videos.list call, at 2 requests/s.
        assert!(c.limiter().clock().now().as_secs_f64() >= 5.0 / 2.0 - 1e-9);
    }

    #[test]
    fn paging_respects_limit() {
        let mut c = client("paged", 2.0);
        assert_eq!(c.search_all("humpback whale", 3).unwrap().len(), 3);
    }
}

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use flukefinder::corpus::{ClassCounts, CorpusError, Interval, Label, LabeledVideo, LocalId, Manifest};
use flukefinder::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::Shared;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub n: usize,
    pub url: String,
    pub timestamp_s: f64,
}

/// One video as the annotator sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub local_id: LocalId,
    pub duration_s: f64,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub interval: Option<Interval>,
    #[serde(default)]
    pub short_interval: bool,
    #[serde(default)]
    pub frame_count: Option<u64>,
    pub version: u64,
    pub frames: Vec<FrameRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelBody {
    pub label: Label,
    pub version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalBody {
    pub start_s: f64,
    pub end_s: f64,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub irrelevant: usize,
    pub relevant: usize,
    pub unlabeled: usize,
    /// Relevant videos still waiting for their interval.
    pub needs_interval: usize,
    pub total: usize,
}

/// JSON error body: `{"error": code, "message": text}` plus the current
/// version on conflicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_version: Option<u64>,
    #[serde(skip)]
    status: u16,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            error: code.into(),
            message: message.into(),
            current_version: None,
            status: status.as_u16(),
        }
    }

    fn unknown(id: &LocalId) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_id", format!("no video {id}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        match &e {
            CorpusError::UnknownId(id) => Self::unknown(id),
            CorpusError::IntervalRejected { violation, .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_interval", violation.to_string())
            }
            CorpusError::Interval(inner) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_interval", inner.to_string())
            }
            CorpusError::WrongLabel { .. } => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "wrong_label", e.to_string()),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()),
        }
    }
}

type Shared_ = State<Arc<Shared>>;

pub(crate) fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/videos/{id}", get(get_video))
        .route("/api/videos/{id}/frames/{file}", get(get_frame))
        .route("/api/videos/{id}/label", post(post_label))
        .route("/api/videos/{id}/interval", post(post_interval))
        .route("/api/progress", get(progress))
        .with_state(shared)
}

fn task(shared: &Shared, video: &LabeledVideo) -> Task {
    let id = video.local_id();
    let frames = match shared.frames.load_index(id) {
        Ok(Some(index)) => index
            .timestamps
            .iter()
            .enumerate()
            .map(|(n, t)| FrameRef {
                n,
                url: format!("/api/videos/{id}/frames/{n}.jpg"),
                timestamp_s: *t,
            })
            .collect(),
        _ => Vec::new(),
    };
    Task {
        local_id: id.clone(),
        duration_s: video.record.duration_s,
        label: video.label,
        interval: video.interval,
        short_interval: video.short_interval,
        frame_count: video.frame_count,
        version: video.version,
        frames,
    }
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    status: Option<String>,
}

fn status_filter(status: &str) -> Option<fn(&LabeledVideo) -> bool> {
    Some(match status {
        "" | "all" => |_| true,
        "unlabeled" => |v| v.label.is_none(),
        "labeled" => |v| v.label.is_some(),
        "relevant" => |v| v.label == Some(Label::Relevant),
        "irrelevant" => |v| v.label == Some(Label::Irrelevant),
        "needs_interval" => |v| v.label.is_some() && v.interval.is_none(),
        _ => return None,
    })
}

async fn list_videos(State(shared): Shared_, Query(q): Query<ListQuery>) -> Result<Json<Vec<Task>>, ApiError> {
    let status = q.status.unwrap_or_default();
    let keep = status_filter(&status).ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_status",
            format!("unknown status {status:?}; use all, unlabeled, labeled, relevant, irrelevant or needs_interval"),
        )
    })?;
    let manifest = shared.manifest.read().await;
    Ok(Json(manifest.videos().iter().filter(|v| keep(v)).map(|v| task(&shared, v)).collect()))
}

async fn get_video(State(shared): Shared_, Path(id): Path<String>) -> Result<Json<Task>, ApiError> {
    let id = LocalId::new(id);
    let manifest = shared.manifest.read().await;
    let video = manifest.get(&id).ok_or_else(|| ApiError::unknown(&id))?;
    Ok(Json(task(&shared, video)))
}

async fn get_frame(State(shared): Shared_, Path((id, file)): Path<(String, String)>) -> Result<Response, ApiError> {
    let id = LocalId::new(id);
    if shared.manifest.read().await.get(&id).is_none() {
        return Err(ApiError::unknown(&id));
    }
    let n: usize = file
        .strip_suffix(".jpg")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_frame", format!("no frame {file}")))?;
    let path = shared.frames.frame_path(&id, n);
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/jpeg")], bytes).into_response()),
        Err(_) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_frame",
            format!("no frame {n} cached for {id}"),
        )),
    }
}

/// Applies `change` to a copy of the manifest after the version check,
/// persists the copy, and only then makes it current.
async fn mutate(
    shared: &Shared,
    id: &LocalId,
    expected_version: u64,
    change: impl FnOnce(&mut Manifest) -> Result<(), CorpusError>,
) -> Result<Task, ApiError> {
    let mut guard = shared.manifest.write().await;
    let current = guard.get(id).ok_or_else(|| ApiError::unknown(id))?.version;
    if current != expected_version {
        let mut err = ApiError::new(
            StatusCode::CONFLICT,
            "version_conflict",
            format!("{id} is at version {current}, request was based on {expected_version}"),
        );
        err.current_version = Some(current);
        return Err(err);
    }
    let mut next = guard.clone();
    change(&mut next)?;
    next.save(&shared.config.manifest_path)?;
    *guard = next;
    Ok(task(shared, guard.get(id).expect("present before the change")))
}

async fn post_label(
    State(shared): Shared_,
    Path(id): Path<String>,
    Json(body): Json<LabelBody>,
) -> Result<Json<Task>, ApiError> {
    let id = LocalId::new(id);
    let seed = derive_seed(shared.config.seed, &format!("interval/{id}"));
    let task = mutate(&shared, &id, body.version, |m| {
        m.upsert_label(&id, body.label)?;
        if body.label == Label::Irrelevant && m.get(&id).is_some_and(|v| v.interval.is_none()) {
            m.assign_machine_interval(&id, seed)?;
        }
        Ok(())
    })
    .await?;
    Ok(Json(task))
}

async fn post_interval(
    State(shared): Shared_,
    Path(id): Path<String>,
    Json(body): Json<IntervalBody>,
) -> Result<Json<Task>, ApiError> {
    let id = LocalId::new(id);
    let task = mutate(&shared, &id, body.version, |m| {
        let interval = Interval::new(body.start_s, body.end_s)?;
        m.set_interval(&id, interval)?;
        Ok(())
    })
    .await?;
    Ok(Json(task))
}

async fn progress(State(shared): Shared_) -> Json<Progress> {
    let manifest = shared.manifest.read().await;
    let ClassCounts {
        irrelevant,
        relevant,
        unlabeled,
    } = manifest.class_counts();
    let needs_interval = manifest
        .videos()
        .iter()
        .filter(|v| v.label == Some(Label::Relevant) && v.interval.is_none())
        .count();
    Json(Progress {
        irrelevant,
        relevant,
        unlabeled,
        needs_interval,
        total: manifest.len(),
    })
}

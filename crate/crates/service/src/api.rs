use std::convert::Infallible;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use comet_core::pipeline::{run_job, GenerationJob, RunOptions};
use comet_core::store::StoreError;
use comet_core::{Danmaku, DanmakuTrack, DanmakuType, GenerationConfig, Position, Rgb};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, watch};
use unicode_segmentation::UnicodeSegmentation;

use crate::session::{CursorMove, SessionExpired, StreamSession};
use crate::{AppState, SessionHandle};

/// Upper bound on a posted text, in grapheme clusters.
pub const MAX_POST_UNITS: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("video {0} not found")]
    VideoNotFound(String),
    #[error("job {0} not found")]
    JobNotFound(String),
    #[error("time {time_s} is outside the video (0..={duration_s})")]
    InvalidTime { time_s: f64, duration_s: f64 },
    #[error("text is empty")]
    EmptyText,
    #[error("text is longer than {MAX_POST_UNITS} characters")]
    TextTooLong,
    #[error("session expired")]
    SessionExpired,
    #[error("session {0} belongs to another video")]
    SessionConflict(String),
    #[error("a job is already running for video {0}")]
    JobActive(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub(crate) fn from_store(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(what) => ApiError::VideoNotFound(what.trim_start_matches("video ").to_string()),
            StoreError::InvalidId(id) => ApiError::VideoNotFound(id),
            other => ApiError::Internal(other.to_string()),
        }
    }

    fn code(&self) -> (StatusCode, &'static str) {
        match self {
            ApiError::VideoNotFound(_) => (StatusCode::NOT_FOUND, "video_not_found"),
            ApiError::JobNotFound(_) => (StatusCode::NOT_FOUND, "job_not_found"),
            ApiError::InvalidTime { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_time"),
            ApiError::EmptyText => (StatusCode::UNPROCESSABLE_ENTITY, "empty_text"),
            ApiError::TextTooLong => (StatusCode::UNPROCESSABLE_ENTITY, "text_too_long"),
            ApiError::SessionExpired => (StatusCode::GONE, "session_expired"),
            ApiError::SessionConflict(_) => (StatusCode::CONFLICT, "session_conflict"),
            ApiError::JobActive(_) => (StatusCode::CONFLICT, "job_active"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.code();
        (status, Json(json!({"error": code, "message": self.to_string()}))).into_response()
    }
}

fn blocking_failed(e: tokio::task::JoinError) -> ApiError {
    ApiError::Internal(e.to_string())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/videos", get(list_videos))
        .route("/videos/{id}/track", get(get_track))
        .route("/videos/{id}/danmaku", get(get_range).post(post_danmaku))
        .route("/videos/{id}/generate", post(generate))
        .route("/videos/{id}/stream", get(stream))
        .route("/videos/{id}/cursor", post(cursor))
        .route("/jobs/{id}", get(get_job))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub id: String,
    pub title: String,
    pub course: String,
    pub duration_s: f64,
    pub has_track: bool,
}

async fn list_videos(State(app): State<Arc<AppState>>) -> Result<Json<Vec<VideoSummary>>, ApiError> {
    tokio::task::spawn_blocking(move || {
        let ids = app.catalog.list_videos().map_err(ApiError::from_store)?;
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            match app.catalog.load_manifest(&id) {
                Ok(m) => out.push(VideoSummary {
                    has_track: app.catalog.video_dir(&id).join("track.json").is_file(),
                    id,
                    title: m.title,
                    course: m.course,
                    duration_s: m.duration_s,
                }),
                Err(e) => tracing::warn!(video = %id, error = %e, "skipping unreadable manifest"),
            }
        }
        Ok(Json(out))
    })
    .await
    .map_err(blocking_failed)?
}

async fn get_track(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<DanmakuTrack>, ApiError> {
    tokio::task::spawn_blocking(move || app.load_track_or_empty(&id).map(Json)).await.map_err(blocking_failed)?
}

#[derive(Debug, Deserialize)]
struct RangeQuery {
    from: Option<f64>,
    to: Option<f64>,
}

async fn get_range(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<RangeQuery>,
) -> Result<Json<Vec<Danmaku>>, ApiError> {
    let from = q.from.unwrap_or(0.0);
    let to = q.to.unwrap_or(f64::INFINITY);
    if from.is_nan() || to.is_nan() || from > to {
        return Err(ApiError::BadRequest(format!("bad range {from}..{to}")));
    }
    let track = tokio::task::spawn_blocking(move || app.load_track_or_empty(&id)).await.map_err(blocking_failed)??;
    Ok(Json(track.danmaku.into_iter().filter(|d| d.time_s >= from && d.time_s <= to).collect()))
}

/// Body of `POST /videos/{id}/danmaku`. The video comes from the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostDanmakuRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub time_s: f64,
    pub text: String,
    #[serde(default)]
    pub color: Rgb,
    #[serde(default)]
    pub position: Position,
}

fn next_user_id(track: &DanmakuTrack) -> String {
    let n = track
        .danmaku
        .iter()
        .filter_map(|d| d.id.strip_prefix('u').and_then(|n| n.parse::<u32>().ok()))
        .max()
        .unwrap_or(0);
    format!("u{:04}", n + 1)
}

async fn post_danmaku(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<PostDanmakuRequest>,
) -> Result<(StatusCode, Json<Danmaku>), ApiError> {
    if req.video_id.as_deref().is_some_and(|v| v != id) {
        return Err(ApiError::BadRequest("video_id does not match the path".into()));
    }
    let text = req.text.split_whitespace().collect::<Vec<_>>().join(" ");
    if text.is_empty() {
        return Err(ApiError::EmptyText);
    }
    if text.graphemes(true).count() > MAX_POST_UNITS {
        return Err(ApiError::TextTooLong);
    }
    tokio::task::spawn_blocking(move || {
        let feed = app.feed(&id)?;
        let manifest = app.catalog.load_manifest(&id).map_err(ApiError::from_store)?;
        if !(req.time_s.is_finite() && req.time_s >= 0.0 && req.time_s <= manifest.duration_s) {
            return Err(ApiError::InvalidTime { time_s: req.time_s, duration_s: manifest.duration_s });
        }
        let _lock = app.catalog.lock_video(&id).map_err(ApiError::from_store)?;
        let mut track = app.load_track_or_empty(&id)?;
        let mut d = Danmaku::new(next_user_id(&track), None, req.time_s, DanmakuType::UserPosted, text);
        d.color = req.color;
        d.position = req.position;
        track.insert_sorted(d.clone());
        app.catalog.save_track_locked(&track).map_err(ApiError::from_store)?;
        feed.replace(track);
        Ok((StatusCode::CREATED, Json(d)))
    })
    .await
    .map_err(blocking_failed)?
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    #[serde(default)]
    config: Option<GenerationConfig>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn generate(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<GenerateRequest>>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let config = req.config.unwrap_or_default();
    config.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let seed = req.seed.unwrap_or(app.config.default_seed);
    let manifest = {
        let app = app.clone();
        let id = id.clone();
        tokio::task::spawn_blocking(move || app.catalog.load_manifest(&id)).await.map_err(blocking_failed)?
    }
    .map_err(ApiError::from_store)?;
    let client =
        (app.config.client_factory)(&manifest, &config, seed).map_err(|e| ApiError::Internal(e.to_string()))?;

    if !app.active_jobs.lock().unwrap_or_else(|e| e.into_inner()).insert(id.clone()) {
        return Err(ApiError::JobActive(id));
    }
    let job_id = format!("job-{}", uuid::Uuid::new_v4().simple());
    if let Err(e) = app.catalog.save_job(&job_id, &GenerationJob::new(job_id.clone(), id.clone())) {
        app.active_jobs.lock().unwrap_or_else(|e| e.into_inner()).remove(&id);
        return Err(ApiError::from_store(e));
    }
    let opts = RunOptions { job_id: job_id.clone(), catalog: Some(app.catalog.clone()), ..RunOptions::default() };
    tokio::task::spawn_blocking(move || {
        let result = run_job(&manifest, &config, &client, &opts, |_| {});
        if let Err(e) = &result {
            tracing::warn!(video = %manifest.id, error = %e, "generation failed");
        }
        app.active_jobs.lock().unwrap_or_else(|e| e.into_inner()).remove(&manifest.id);
        app.refresh_feed(&manifest.id);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({"job_id": job_id}))))
}

async fn get_job(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<GenerationJob>, ApiError> {
    tokio::task::spawn_blocking(move || match app.catalog.load_job::<GenerationJob>(&id) {
        Ok(j) => Ok(Json(j)),
        Err(StoreError::NotFound(_) | StoreError::InvalidId(_)) => Err(ApiError::JobNotFound(id)),
        Err(e) => Err(ApiError::Internal(e.to_string())),
    })
    .await
    .map_err(blocking_failed)?
}

impl AppState {
    /// Looks up a live session, creating it on first use. Expired sessions are dropped.
    fn session(&self, video_id: &str, session_id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        let feed = self.feed(video_id)?;
        let now = Instant::now();
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let expired = |h: &Arc<SessionHandle>| h.session.lock().unwrap_or_else(|e| e.into_inner()).is_expired(now);
        if sessions.get(session_id).is_some_and(expired) {
            sessions.remove(session_id);
            return Err(ApiError::SessionExpired);
        }
        sessions.retain(|_, h| !expired(h));
        if let Some(h) = sessions.get(session_id) {
            if h.session.lock().unwrap_or_else(|e| e.into_inner()).video_id != video_id {
                return Err(ApiError::SessionConflict(session_id.to_string()));
            }
            return Ok(h.clone());
        }
        let handle = Arc::new(SessionHandle {
            session: Mutex::new(StreamSession::new(session_id, video_id, self.config.stream, now)),
            cursor: watch::channel(0).0,
            feed,
        });
        sessions.insert(session_id.to_string(), handle.clone());
        Ok(handle)
    }

    fn forget_session(&self, session_id: &str) {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(session_id);
    }
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    session: Option<String>,
}

async fn stream(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let session_id = q.session.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    let handle = {
        let (app, id, session_id) = (app.clone(), id.clone(), session_id.clone());
        tokio::task::spawn_blocking(move || app.session(&id, &session_id)).await.map_err(blocking_failed)??
    };
    let (tx, rx) = mpsc::channel::<Event>(256);
    tokio::spawn(pump(app, handle, session_id, tx));
    let events = futures::stream::unfold(rx, |mut rx| async move { rx.recv().await.map(|e| (Ok(e), rx)) });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

/// Feeds one SSE connection until the client leaves or the session expires.
async fn pump(app: Arc<AppState>, handle: Arc<SessionHandle>, session_id: String, tx: mpsc::Sender<Event>) {
    let mut cursor_rx = handle.cursor.subscribe();
    let mut track_rx = handle.feed.changed.subscribe();
    let hello = Event::default().event("session").data(json!({"session": session_id}).to_string());
    if tx.send(hello).await.is_err() {
        return;
    }
    loop {
        let snapshot = handle.feed.snapshot();
        let polled = handle.session.lock().unwrap_or_else(|e| e.into_inner()).poll(&snapshot, Instant::now());
        match polled {
            Ok(batch) => {
                for d in batch {
                    let ev = Event::default().event("danmaku").json_data(&d).expect("delivery serializes");
                    if tx.send(ev).await.is_err() {
                        return;
                    }
                }
            }
            Err(SessionExpired) => {
                app.forget_session(&session_id);
                let _ =
                    tx.send(Event::default().event("expired").data(json!({"session": session_id}).to_string())).await;
                return;
            }
        }
        tokio::select! {
            _ = cursor_rx.changed() => {}
            _ = track_rx.changed() => {}
            _ = tokio::time::sleep(app.config.poll_interval) => {}
            _ = tx.closed() => return,
        }
    }
}

#[derive(Debug, Deserialize)]
struct CursorRequest {
    session: String,
    position_s: f64,
}

async fn cursor(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<CursorRequest>,
) -> Result<Json<serde_json::Value>, ApiError> {
    if !req.position_s.is_finite() {
        return Err(ApiError::BadRequest("position_s must be finite".into()));
    }
    let handle = {
        let app = app.clone();
        let (id, session) = (id.clone(), req.session.clone());
        tokio::task::spawn_blocking(move || app.session(&id, &session)).await.map_err(blocking_failed)??
    };
    let moved = handle.session.lock().unwrap_or_else(|e| e.into_inner()).heartbeat(req.position_s, Instant::now());
    match moved {
        Ok(mv) => {
            handle.cursor.send_modify(|n| *n += 1);
            let mv = match mv {
                CursorMove::Forward => "forward",
                CursorMove::Seek => "seek",
                CursorMove::Skip => "skip",
            };
            Ok(Json(json!({"session": req.session, "position_s": req.position_s, "move": mv})))
        }
        Err(SessionExpired) => {
            app.forget_session(&req.session);
            Err(ApiError::SessionExpired)
        }
    }
}

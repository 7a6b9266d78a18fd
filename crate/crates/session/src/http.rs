//! HTTP/JSON interface. Route table:
//!
//! | method | path | body / result |
//! |---|---|---|
//! | POST | `/api/studies` | study config → `{study_id, conditions}` |
//! | GET | `/api/studies/{study}` | `{study_id, setup, presentation, conditions}` |
//! | POST | `/api/studies/{study}/sessions` | `{subject_id}` → session status |
//! | GET | `/api/studies/{study}/sessions/{subject}` | session status |
//! | GET | `/api/studies/{study}/sessions/{subject}/next` | next step |
//! | GET | `/api/studies/{study}/sessions/{subject}/stimuli/{token}` | image bytes |
//! | POST | `/api/studies/{study}/sessions/{subject}/scores` | `{item, score}` → ack |
//! | GET | `/api/studies/{study}/export` | scores CSV |
//!
//! Errors are `{"error": kind, "message": text}` with 400 (invalid), 404
//! (unknown), 409 (protocol conflict) or 500.

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use crate::config::StudyConfig;
use crate::study::{Study, STUDY_FILE};
use crate::{Result, SessionError};

pub struct AppState {
    data_dir: PathBuf,
    studies: RwLock<BTreeMap<String, Arc<Study>>>,
}

impl AppState {
    /// Loads every study found under `data_dir`.
    pub fn load(data_dir: &Path) -> Result<Arc<AppState>> {
        std::fs::create_dir_all(data_dir).map_err(|source| SessionError::Io { path: data_dir.to_path_buf(), source })?;
        let mut studies = BTreeMap::new();
        let entries = std::fs::read_dir(data_dir).map_err(|source| SessionError::Io { path: data_dir.to_path_buf(), source })?;
        let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        dirs.sort();
        for dir in dirs {
            if dir.join(STUDY_FILE).is_file() {
                let study = Study::open(&dir)?;
                studies.insert(study.id().to_string(), Arc::new(study));
            }
        }
        Ok(Arc::new(AppState { data_dir: data_dir.to_path_buf(), studies: RwLock::new(studies) }))
    }

    pub fn study(&self, id: &str) -> Result<Arc<Study>> {
        self.studies
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(format!("no study `{id}`")))
    }

    pub fn create_study(&self, config: StudyConfig) -> Result<Arc<Study>> {
        let mut studies = self.studies.write().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = studies.get(&config.name) {
            if existing.config() == &config {
                return Ok(existing.clone());
            }
            return Err(SessionError::Conflict(format!("study `{}` exists with a different configuration", config.name)));
        }
        let study = Arc::new(Study::create(&self.data_dir, config)?);
        studies.insert(study.id().to_string(), study.clone());
        Ok(study)
    }
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            SessionError::Invalid(_) | SessionError::MissingStimuli(_) => (StatusCode::BAD_REQUEST, "invalid"),
            SessionError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            SessionError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            SessionError::Journal { .. } | SessionError::Io { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
        };
        (status, Json(json!({ "error": kind, "message": self.to_string() }))).into_response()
    }
}

type Shared = State<Arc<AppState>>;
type ApiResult<T> = std::result::Result<T, SessionError>;

async fn create_study(State(app): Shared, body: axum::body::Bytes) -> ApiResult<impl IntoResponse> {
    let de = &mut serde_json::Deserializer::from_slice(&body);
    let config: StudyConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| SessionError::Invalid(format!("study config at `{}`: {}", e.path(), e.inner())))?;
    let study = app.create_study(config)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "study_id": study.id(), "conditions": study.config().conditions.len() })),
    ))
}

async fn get_study(State(app): Shared, UrlPath(study): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let s = app.study(&study)?;
    let c = s.config();
    Ok(Json(json!({
        "study_id": s.id(),
        "setup": c.setup,
        "presentation": c.presentation,
        "conditions": c.conditions.len(),
    })))
}

#[derive(Deserialize)]
struct NewSession {
    subject_id: String,
}

async fn start_session(
    State(app): Shared,
    UrlPath(study): UrlPath<String>,
    body: axum::body::Bytes,
) -> ApiResult<impl IntoResponse> {
    let body: NewSession =
        serde_json::from_slice(&body).map_err(|e| SessionError::Invalid(format!("session body: {e}")))?;
    Ok(Json(app.study(&study)?.start_session(&body.subject_id)?))
}

async fn session_status(State(app): Shared, UrlPath((study, subject)): UrlPath<(String, String)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.study(&study)?.status(&subject)?))
}

async fn next_step(State(app): Shared, UrlPath((study, subject)): UrlPath<(String, String)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(app.study(&study)?.next(&subject)?))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("png") => "image/png",
        Some("pgm") => "image/x-portable-graymap",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

async fn stimulus(
    State(app): Shared,
    UrlPath((study, subject, token)): UrlPath<(String, String, String)>,
) -> ApiResult<impl IntoResponse> {
    let path = app.study(&study)?.serve(&subject, &token)?;
    let bytes = tokio::fs::read(&path).await.map_err(|source| SessionError::Io { path: path.clone(), source })?;
    Ok(([(header::CONTENT_TYPE, content_type(&path)), (header::CACHE_CONTROL, "no-store")], bytes))
}

#[derive(Deserialize)]
struct ScoreBody {
    item: usize,
    score: i64,
}

async fn submit_score(
    State(app): Shared,
    UrlPath((study, subject)): UrlPath<(String, String)>,
    body: axum::body::Bytes,
) -> ApiResult<impl IntoResponse> {
    let body: ScoreBody =
        serde_json::from_slice(&body).map_err(|e| SessionError::Invalid(format!("score body: {e}")))?;
    Ok(Json(app.study(&study)?.submit(&subject, body.item, body.score)?))
}

async fn export(State(app): Shared, UrlPath(study): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    let csv = app.study(&study)?.export_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/studies", post(create_study))
        .route("/api/studies/{study}", get(get_study))
        .route("/api/studies/{study}/sessions", post(start_session))
        .route("/api/studies/{study}/sessions/{subject}", get(session_status))
        .route("/api/studies/{study}/sessions/{subject}/next", get(next_step))
        .route("/api/studies/{study}/sessions/{subject}/stimuli/{token}", get(stimulus))
        .route("/api/studies/{study}/sessions/{subject}/scores", post(submit_score))
        .route("/api/studies/{study}/export", get(export))
        .with_state(state)
}

/// Serves until the listener fails or the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

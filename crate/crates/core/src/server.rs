//! HTTP API over one loaded corpus and an annotation directory, for the
//! clinician annotation UI.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crate::error::Error;
use crate::fidelity::{
    adherence_summary, violation_summary, AdherenceSummary, AnnotationStore, ChecklistEntry,
    FidelityAnnotation, ViolationSummary, CHECKLIST,
};
use crate::transcript::{Corpus, Session};

/// Immutable corpus plus the annotation store.
pub struct AppState {
    sessions: Vec<Session>,
    index: HashMap<String, usize>,
    store: AnnotationStore,
}

impl AppState {
    pub fn new(corpus: Corpus, store: AnnotationStore) -> Self {
        let index = corpus
            .sessions
            .iter()
            .enumerate()
            .map(|(i, s)| (s.session_id.clone(), i))
            .collect();
        AppState { sessions: corpus.sessions, index, store }
    }

    fn session(&self, id: &str) -> Result<&Session, ApiError> {
        self.index
            .get(id)
            .map(|&i| &self.sessions[i])
            .ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status: status.as_u16(), code: code.into(), message: message.into() }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match &e {
            Error::NotFound(_) => ApiError::not_found(e.to_string()),
            Error::VersionConflict { .. } => ApiError::new(StatusCode::CONFLICT, "version_conflict", e.to_string()),
            Error::InvalidAnnotation(_) | Error::Json(_) => ApiError::bad_request("invalid_annotation", e.to_string()),
            _ => {
                log::error!("internal error: {e}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub turn_count: usize,
    pub annotated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub adherence: AdherenceSummary,
    pub violations: ViolationSummary,
    pub by_annotator: BTreeMap<String, AdherenceSummary>,
}

#[derive(Debug, Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> crate::error::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> ApiResult<Vec<SessionSummary>> {
    let st = state.clone();
    let annotations = blocking(move || st.store.list()).await?;
    let annotated: std::collections::HashSet<&str> =
        annotations.iter().map(|a| a.session_id.as_str()).collect();
    Ok(Json(
        state
            .sessions
            .iter()
            .map(|s| SessionSummary {
                session_id: s.session_id.clone(),
                turn_count: s.turns.len(),
                annotated: annotated.contains(s.session_id.as_str()),
            })
            .collect(),
    ))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Session> {
    Ok(Json(state.session(&id)?.clone()))
}

async fn get_annotation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<AnnotatorQuery>,
) -> ApiResult<FidelityAnnotation> {
    state.session(&id)?;
    let annotator = q
        .annotator
        .filter(|a| !a.trim().is_empty())
        .ok_or_else(|| ApiError::bad_request("missing_annotator", "query parameter `annotator` is required"))?;
    let st = state.clone();
    let (sid, aid) = (id.clone(), annotator.clone());
    blocking(move || st.store.get(&sid, &aid))
        .await?
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("no annotation for session {id:?} by {annotator:?}")))
}

async fn put_annotation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<FidelityAnnotation> {
    let turn_count = state.session(&id)?.turns.len();
    let annotation: FidelityAnnotation = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("invalid_annotation", format!("malformed annotation: {e}")))?;
    if annotation.session_id != id {
        return Err(ApiError::bad_request(
            "session_mismatch",
            format!("body session_id {:?} does not match path {id:?}", annotation.session_id),
        ));
    }
    let st = state.clone();
    let stored = blocking(move || st.store.save(annotation, Some(turn_count))).await?;
    Ok(Json(stored))
}

async fn summary(State(state): State<Arc<AppState>>) -> ApiResult<Summary> {
    let st = state.clone();
    let all: Vec<FidelityAnnotation> = blocking(move || st.store.list())
        .await?
        .into_iter()
        .filter(|a| state.index.contains_key(&a.session_id))
        .collect();
    let mut groups: BTreeMap<String, Vec<FidelityAnnotation>> = BTreeMap::new();
    for a in &all {
        groups.entry(a.annotator_id.clone()).or_default().push(a.clone());
    }
    Ok(Json(Summary {
        adherence: adherence_summary(&all),
        violations: violation_summary(&all),
        by_annotator: groups.into_iter().map(|(k, v)| (k, adherence_summary(&v))).collect(),
    }))
}

async fn checklist() -> Json<&'static [ChecklistEntry]> {
    Json(&CHECKLIST)
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// The API router; when `ui_dir` is given its files are served at `/`.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::PUT, Method::OPTIONS])
        .allow_headers(Any);
    let api = Router::new()
        .route("/api/sessions", get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/annotation", get(get_annotation).put(put_annotation))
        .route("/api/summary", get(summary))
        .route("/api/checklist", get(checklist))
        .route("/api/{*rest}", get(api_not_found).put(api_not_found))
        .with_state(state);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api_not_found),
    };
    app.layer(cors)
}

/// Serve until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

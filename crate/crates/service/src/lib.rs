//! HTTP front end of [`recourse::service::SessionStore`].
//!
//! ```text
//! POST /sessions                      create, returns the first question
//! GET  /sessions/{id}                 current record
//! POST /sessions/{id}/answers         {token, answer}
//! POST /sessions/{id}/recourse        {method}
//! GET  /sessions/{id}/transcript
//! GET  /datasets
//! ```
//!
//! Every failure is `{code, message, detail}` with a matching status code.
//! Solver work runs on the blocking pool.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use recourse::bench::{prepare, DatasetRef, ExperimentConfig};
use recourse::service::{
    AnswerRequest, CreateSessionRequest, DatasetEntry, ErrorCode, RecourseRequest, ServiceError, SessionStore,
};
use serde::Serialize;

/// Header checked when the server runs with an API key.
pub const API_KEY_HEADER: &str = "x-api-key";

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(ServiceError::invalid(e.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone)]
struct AppState {
    store: Arc<SessionStore>,
    api_key: Option<Arc<str>>,
}

/// Runs `f` against the store off the async workers.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> Result<T, ServiceError> + Send + 'static,
{
    let store = Arc::clone(&state.store);
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServiceError::internal(format!("worker panicked: {e}")))?
        .map(Json)
        .map_err(ApiError)
}

async fn datasets(State(state): State<AppState>) -> ApiResult<Vec<recourse::service::DatasetInfo>> {
    blocking(&state, |s| Ok(s.datasets())).await
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(request) = body?;
    let record = blocking(&state, move |s| s.create_session(request)).await?;
    Ok((StatusCode::CREATED, record))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl Serialize> {
    blocking(&state, move |s| s.get_session(&id)).await
}

async fn submit_answer(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(request) = body?;
    blocking(&state, move |s| s.submit_answer(&id, request)).await
}

async fn request_recourse(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<RecourseRequest>, JsonRejection>,
) -> ApiResult<impl Serialize> {
    let Json(request) = body?;
    blocking(&state, move |s| s.request_recourse(&id, request)).await
}

async fn transcript(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<impl Serialize> {
    blocking(&state, move |s| s.transcript(&id)).await
}

async fn not_found() -> ApiError {
    ApiError(ServiceError::new(ErrorCode::NotFound, "no such route"))
}

async fn check_key(State(state): State<AppState>, headers: HeaderMap, request: Request, next: Next) -> Response {
    if let Some(key) = &state.api_key {
        let given = headers.get(API_KEY_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(key) {
            return (
                StatusCode::UNAUTHORIZED,
                Json(ServiceError::invalid("missing or wrong API key").with_detail(serde_json::json!({
                    "header": API_KEY_HEADER
                }))),
            )
                .into_response();
        }
    }
    next.run(request).await
}

/// Router options.
#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Required value of the `x-api-key` header.
    pub api_key: Option<String>,
    /// Static UI bundle served under `/`.
    pub static_dir: Option<PathBuf>,
}

pub fn router(store: Arc<SessionStore>, options: Options) -> Router {
    let state = AppState {
        store,
        api_key: options.api_key.map(Into::into),
    };
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/sessions/{id}/recourse", post(request_recourse))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/datasets", get(datasets))
        .route_layer(middleware::from_fn_with_state(state.clone(), check_key))
        .with_state(state);
    match options.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.fallback(not_found),
    }
}

/// The synthetic dataset with its classifier, prepared under `seed`.
pub fn synthetic_entry(n: usize, seed: u64) -> Result<DatasetEntry, ServiceError> {
    entry("synthetic", DatasetRef::Synthetic { n }, seed)
}

/// A CSV dataset described by a schema file.
pub fn csv_entry(id: &str, csv: &Path, schema: &Path, seed: u64) -> Result<DatasetEntry, ServiceError> {
    let dataset = DatasetRef::Csv {
        path: csv.to_path_buf(),
        schema: schema.to_path_buf(),
    };
    entry(id, dataset, seed)
}

fn entry(id: &str, dataset: DatasetRef, seed: u64) -> Result<DatasetEntry, ServiceError> {
    let cfg = ExperimentConfig {
        dataset,
        seed,
        ..ExperimentConfig::default()
    };
    let prepared = prepare(&cfg).map_err(|e| ServiceError::invalid(format!("dataset `{id}`: {e}")))?;
    Ok(DatasetEntry::from_prepared(id, prepared))
}

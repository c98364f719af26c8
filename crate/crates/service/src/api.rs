//! REST API over the backend and chunk store.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use vigil_core::classify::InferenceRecord;
use vigil_core::ingest::{ChunkStore, StoreError};
use vigil_core::ClassLabel;

use crate::backend::{AlertFilter, Backend, BackendError, Decision, DEFAULT_PAGE_SIZE};
use crate::thumbs::{frame_png, thumb_frames};

#[derive(Clone)]
pub struct ApiState {
    pub backend: Arc<Backend>,
    pub store: Arc<dyn ChunkStore>,
    /// Static bearer token; `None` disables the check.
    pub token: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation_error", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<BackendError> for ApiError {
    fn from(e: BackendError) -> Self {
        let message = e.to_string();
        match e {
            BackendError::UnknownChunk(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_chunk", message),
            BackendError::NotFound(_) => Self::not_found(message),
            BackendError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", message),
            BackendError::Validation(_) => Self::validation(message),
            BackendError::Persistence(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "persistence_failure", message),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => Self::not_found(e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "store_failure", other.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/v1/inferences", post(post_inference))
        .route("/v1/alerts", get(list_alerts))
        .route("/v1/alerts/{id}", get(get_alert))
        .route("/v1/alerts/{id}/review", post(review_alert))
        .route("/v1/chunks/{id}", get(get_chunk))
        .route("/v1/chunks/{id}/thumbs", get(list_thumbs))
        .route("/v1/chunks/{id}/thumbs/{index}", get(get_thumb))
        .route("/v1/retraining-queue", get(retraining_queue).post(report_false_classification))
        .route("/v1/metrics/summary", get(metrics_summary))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(state): State<ApiState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid API token")
                .into_response();
        }
    }
    next.run(req).await
}

fn parse_json<T: serde::de::DeserializeOwned>(headers: &HeaderMap, body: &Bytes) -> ApiResult<T> {
    if let Some(ct) = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()) {
        if !ct.starts_with("application/json") {
            return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", ct.to_string()));
        }
    }
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid JSON body: {e}")))
}

fn query_map(raw: Option<String>, allowed: &[&str]) -> ApiResult<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (k, v) in form_urlencoded::parse(raw.unwrap_or_default().as_bytes()) {
        if !allowed.contains(&k.as_ref()) {
            return Err(ApiError::validation(format!("unknown query parameter {k:?}")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ApiError::validation(format!("repeated query parameter {k:?}")));
        }
    }
    Ok(out)
}

fn parse_param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> ApiResult<Option<T>> {
    q.get(key)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| ApiError::validation(format!("malformed {key}: {v:?}"))))
        .transpose()
}

fn parse_id(raw: &str) -> ApiResult<i64> {
    raw.parse().map_err(|_| ApiError::validation(format!("malformed id {raw:?}")))
}

async fn post_inference(State(s): State<ApiState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let rec: InferenceRecord = parse_json(&headers, &body)?;
    let outcome = s.backend.record_inference(&rec)?;
    let status = if outcome.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(outcome)).into_response())
}

async fn list_alerts(State(s): State<ApiState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let q = query_map(raw, &["state", "stream_id", "since_ts", "page", "page_size"])?;
    let state = match q.get("state").filter(|v| !v.is_empty()) {
        Some(v) => Some(v.parse()?),
        None => None,
    };
    let filter = AlertFilter {
        state,
        stream_id: q.get("stream_id").filter(|v| !v.is_empty()).cloned(),
        since_ts: parse_param(&q, "since_ts")?,
        page: parse_param(&q, "page")?.unwrap_or(1),
        page_size: parse_param(&q, "page_size")?.unwrap_or(DEFAULT_PAGE_SIZE),
    };
    Ok(Json(s.backend.list_alerts(&filter)?).into_response())
}

async fn get_alert(State(s): State<ApiState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.backend.alert(parse_id(&id)?)?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewBody {
    decision: Decision,
    reviewer: String,
    #[serde(default)]
    corrected_label: Option<ClassLabel>,
}

async fn review_alert(
    State(s): State<ApiState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    let b: ReviewBody = parse_json(&headers, &body)?;
    Ok(Json(s.backend.review_alert(id, b.decision, &b.reviewer, b.corrected_label)?).into_response())
}

async fn get_chunk(State(s): State<ApiState>, Path(id): Path<String>) -> ApiResult<Response> {
    let chunk = s.backend.chunk(&id)?;
    let inferences = s.backend.inferences_for_chunk(&id)?;
    let stored = s.store.get(&chunk.storage_key).is_ok();
    Ok(Json(json!({
        "chunk": chunk,
        "inferences": inferences,
        "stored": stored,
        "thumbs": format!("/v1/chunks/{id}/thumbs"),
    }))
    .into_response())
}

fn chunk_bytes(s: &ApiState, id: &str) -> ApiResult<Vec<u8>> {
    let chunk = s.backend.chunk(id)?;
    Ok(s.store.get(&chunk.storage_key)?)
}

async fn list_thumbs(State(s): State<ApiState>, Path(id): Path<String>) -> ApiResult<Response> {
    let bytes = chunk_bytes(&s, &id)?;
    let frames = thumb_frames(&bytes).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "decode_failure", e))?;
    let thumbs: Vec<Value> = frames
        .iter()
        .enumerate()
        .map(|(i, f)| json!({ "index": i, "frame": f, "url": format!("/v1/chunks/{id}/thumbs/{i}") }))
        .collect();
    Ok(Json(json!({ "chunk_id": id, "thumbs": thumbs })).into_response())
}

async fn get_thumb(State(s): State<ApiState>, Path((id, index)): Path<(String, String)>) -> ApiResult<Response> {
    let index: usize = index.parse().map_err(|_| ApiError::validation(format!("malformed thumbnail index {index:?}")))?;
    let bytes = chunk_bytes(&s, &id)?;
    let decode_err = |e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "decode_failure", e);
    let frames = thumb_frames(&bytes).map_err(decode_err)?;
    let frame = *frames.get(index).ok_or_else(|| ApiError::not_found(format!("thumbnail {index} of {id}")))?;
    let png = frame_png(&bytes, frame).map_err(decode_err)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn retraining_queue(State(s): State<ApiState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let q = query_map(raw, &["format"])?;
    match q.get("format").map(String::as_str) {
        None | Some("json") => {
            let items = s.backend.retraining_items()?;
            Ok(Json(json!({ "total": items.len(), "items": items })).into_response())
        }
        Some("annotation") => {
            let bytes = s.backend.retraining_export()?;
            Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], bytes).into_response())
        }
        Some(other) => Err(ApiError::validation(format!("unknown format {other:?}"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportBody {
    chunk_id: String,
    predicted: ClassLabel,
    #[serde(default)]
    corrected: Option<ClassLabel>,
}

async fn report_false_classification(
    State(s): State<ApiState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let b: ReportBody = parse_json(&headers, &body)?;
    let item = s.backend.report_false_classification(&b.chunk_id, b.predicted, b.corrected)?;
    Ok((StatusCode::CREATED, Json(item)).into_response())
}

async fn metrics_summary(State(s): State<ApiState>) -> ApiResult<Response> {
    Ok(Json(s.backend.metrics_summary()?).into_response())
}

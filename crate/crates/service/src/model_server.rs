//! Server side of the remote classifier protocol: wraps any local
//! classifier and reads chunks from the shared store.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::json;
use vigil_core::classify::{ChunkInput, Classifier, ClassifyError, Concurrency};
use vigil_core::ingest::{ChunkStore, StoreError};
use vigil_core::pipeline::{build_test_pipeline, SamplingStrategy, TransformConfig};

use crate::remote::{ClassifyRequest, ClassifyResponse};

#[derive(Clone)]
pub struct ModelServerState {
    store: Arc<dyn ChunkStore>,
    classifier: Arc<dyn Classifier>,
    strategy: SamplingStrategy,
    transform: TransformConfig,
    gate: Arc<Mutex<()>>,
}

impl ModelServerState {
    pub fn new(
        store: Arc<dyn ChunkStore>,
        classifier: Arc<dyn Classifier>,
        strategy: SamplingStrategy,
        transform: TransformConfig,
    ) -> Self {
        ModelServerState { store, classifier, strategy, transform, gate: Arc::new(Mutex::new(())) }
    }
}

pub fn model_server(state: ModelServerState) -> Router {
    Router::new().route("/v1/classify", post(classify)).with_state(state)
}

fn error(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(json!({ "error": { "code": code, "message": message } }))).into_response()
}

async fn classify(State(s): State<ModelServerState>, body: Bytes) -> Response {
    let req: ClassifyRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "validation_error", e.to_string()),
    };
    let result = tokio::task::spawn_blocking(move || run(&s, &req.chunk_key)).await;
    match result {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(resp)) => *resp,
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    }
}

fn run(s: &ModelServerState, key: &str) -> Result<ClassifyResponse, Box<Response>> {
    let error = |status, code, message| Box::new(error(status, code, message));
    let bytes = s.store.get(key).map_err(|e| match e {
        StoreError::NotFound(_) => error(StatusCode::NOT_FOUND, "not_found", e.to_string()),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, "store_failure", other.to_string()),
    })?;
    let batch = if s.classifier.needs_batch() {
        let b = build_test_pipeline(&bytes, &s.strategy, &s.transform)
            .map_err(|e| error(StatusCode::UNPROCESSABLE_ENTITY, "pipeline_failure", e.to_string()))?;
        Some(b)
    } else {
        None
    };
    let input = ChunkInput { chunk_id: key, storage_key: key, bytes: &bytes, batch: batch.as_ref() };
    let _flight = (s.classifier.concurrency() == Concurrency::SingleFlight)
        .then(|| s.gate.lock().unwrap_or_else(|p| p.into_inner()));
    let p = s.classifier.classify(&input).map_err(|e| match e {
        ClassifyError::InvalidInput(_) => error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", e.to_string()),
        other => error(StatusCode::SERVICE_UNAVAILABLE, "inference_unavailable", other.to_string()),
    })?;
    Ok(ClassifyResponse {
        label: p.scores.argmax().code(),
        scores: *p.scores.as_array(),
        model_id: s.classifier.model_id().to_string(),
    })
}

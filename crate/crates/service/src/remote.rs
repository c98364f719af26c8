//! Client for the remote classifier protocol.
//!
//! `POST {endpoint}/v1/classify` with `{"chunk_key": ...}`; the server reads
//! the chunk from the shared store and answers
//! `{"label": 0-3, "scores": [4 floats], "model_id": ...}`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vigil_core::classify::{now_ms, ChunkInput, Classifier, ClassifyError, Concurrency, InferenceRecord, Prediction};
use vigil_core::{ClassLabel, ScoreVector};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub chunk_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub label: u8,
    pub scores: [f64; 4],
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub timeout: Duration,
    /// Extra attempts after an unavailable response.
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig { endpoint: endpoint.into(), timeout: DEFAULT_TIMEOUT, retries: 0 }
    }
}

pub struct RemoteClassifier {
    cfg: RemoteConfig,
    url: String,
    client: reqwest::blocking::Client,
    model_id: String,
}

/// Checks a response body against the protocol and the score invariants.
pub fn parse_response(body: &[u8]) -> Result<(Prediction, String), ClassifyError> {
    let bad = |m: String| ClassifyError::SchemaViolation(m);
    let v: Value = serde_json::from_slice(body).map_err(|e| bad(format!("response is not JSON: {e}")))?;
    let resp: ClassifyResponse = serde_json::from_value(v).map_err(|e| bad(format!("response shape: {e}")))?;
    let label = ClassLabel::from_code(resp.label).ok_or_else(|| bad(format!("label {} out of range", resp.label)))?;
    let scores = ScoreVector::new(resp.scores).map_err(|e| bad(e.to_string()))?;
    if scores.argmax() != label {
        return Err(bad(format!("label {label} is not the argmax of {:?}", resp.scores)));
    }
    Ok((Prediction { label, scores }, resp.model_id))
}

impl RemoteClassifier {
    pub fn new(cfg: RemoteConfig) -> Result<Self, ClassifyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| ClassifyError::Unavailable(e.to_string()))?;
        let url = format!("{}/v1/classify", cfg.endpoint.trim_end_matches('/'));
        let model_id = format!("remote:{}", cfg.endpoint);
        Ok(RemoteClassifier { cfg, url, client, model_id })
    }

    fn attempt(&self, chunk_key: &str) -> Result<(Prediction, String), ClassifyError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&ClassifyRequest { chunk_key: chunk_key.to_string() })
            .send()
            .map_err(|e| {
                let what = if e.is_timeout() { "timed out" } else { "request failed" };
                ClassifyError::Unavailable(format!("{} {what}: {e}", self.url))
            })?;
        let status = resp.status();
        let body = resp.bytes().map_err(|e| ClassifyError::Unavailable(format!("reading response: {e}")))?;
        if !status.is_success() {
            let snippet = String::from_utf8_lossy(&body[..body.len().min(200)]).into_owned();
            return Err(ClassifyError::Unavailable(format!("{} returned {status}: {snippet}", self.url)));
        }
        parse_response(&body)
    }

    /// One protocol round trip, with the configured retries on
    /// unavailability. Returns the server's model id.
    pub fn request(&self, chunk_key: &str) -> Result<(Prediction, String), ClassifyError> {
        let mut last = None;
        for _ in 0..=self.cfg.retries {
            match self.attempt(chunk_key) {
                Err(ClassifyError::Unavailable(e)) => last = Some(ClassifyError::Unavailable(e)),
                other => return other,
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

impl Classifier for RemoteClassifier {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    fn needs_batch(&self) -> bool {
        false
    }

    fn classify(&self, input: &ChunkInput<'_>) -> Result<Prediction, ClassifyError> {
        self.request(input.storage_key).map(|(p, _)| p)
    }
}

/// Classifies a stored chunk through a model server and builds the record
/// under the server's model id.
pub fn remote_classify(
    classifier: &RemoteClassifier,
    chunk_id: &str,
    chunk_key: &str,
) -> Result<InferenceRecord, ClassifyError> {
    let started = Instant::now();
    let (p, model_id) = classifier.request(chunk_key)?;
    Ok(InferenceRecord {
        chunk_id: chunk_id.to_string(),
        label: p.label,
        scores: p.scores,
        model_id,
        latency_ms: started.elapsed().as_secs_f64() * 1e3,
        created_ts: now_ms(),
    })
}

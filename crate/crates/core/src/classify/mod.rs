//! The prediction side: class scores, the classifier contract and the
//! stand-in models used at desk scale.

mod card;
mod features;
mod math;
mod stub;
mod toy;

pub use card::{reference_model_cards, ModelCard};
pub use features::{motion_features, MOTION_FEATURES, MOTION_GRID};
pub use math::{log_softmax, softmax, weighted_ce, weighted_ce_grad, ClassWeights};
pub use stub::{action_code_histogram, stub_classify, StubClassifier, STUB_SCORE_FLOOR};
pub use toy::{train_toy, LabeledFeatures, ToyClassifier, ToyModel, ToyTrainConfig, TrainError, TrainingHistory};

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::label::{ClassLabel, ScoreVector};
use crate::pipeline::ClipBatch;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    /// The model could not be reached or failed; the chunk should be retried.
    #[error("inference unavailable: {0}")]
    Unavailable(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Whether a classifier tolerates parallel calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    Concurrent,
    SingleFlight,
}

/// Everything a classifier may look at for one chunk.
#[derive(Debug, Clone, Copy)]
pub struct ChunkInput<'a> {
    pub chunk_id: &'a str,
    pub storage_key: &'a str,
    /// Raw SVF bytes of the chunk.
    pub bytes: &'a [u8],
    /// Test-pipeline output, present when the classifier asked for it.
    pub batch: Option<&'a ClipBatch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: ClassLabel,
    pub scores: ScoreVector,
}

pub trait Classifier: Send + Sync {
    fn model_id(&self) -> &str;

    fn concurrency(&self) -> Concurrency;

    /// Whether [`ChunkInput::batch`] must be populated.
    fn needs_batch(&self) -> bool {
        true
    }

    fn classify(&self, input: &ChunkInput<'_>) -> Result<Prediction, ClassifyError>;
}

/// One classification result bound to a chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub chunk_id: String,
    pub label: ClassLabel,
    pub scores: ScoreVector,
    pub model_id: String,
    pub latency_ms: f64,
    /// Milliseconds since the Unix epoch.
    pub created_ts: i64,
}

impl InferenceRecord {
    /// Checks `label == argmax(scores)`.
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.scores.argmax() != self.label {
            return Err(ClassifyError::SchemaViolation(format!(
                "label {} is not the argmax of {:?}",
                self.label,
                self.scores.as_array()
            )));
        }
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return Err(ClassifyError::SchemaViolation(format!("latency {} ms", self.latency_ms)));
        }
        Ok(())
    }
}

pub fn now_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

/// Calls `classifier` and wraps the result with identity and timing.
///
/// The label is re-derived from the scores so every record satisfies the
/// argmax invariant regardless of the implementation.
pub fn run_classifier(classifier: &dyn Classifier, input: &ChunkInput<'_>) -> Result<InferenceRecord, ClassifyError> {
    if classifier.needs_batch() && input.batch.is_none() {
        return Err(ClassifyError::InvalidInput(format!("{} requires a clip batch", classifier.model_id())));
    }
    let started = Instant::now();
    let prediction = classifier.classify(input)?;
    let latency_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(InferenceRecord {
        chunk_id: input.chunk_id.to_string(),
        label: prediction.scores.argmax(),
        scores: prediction.scores,
        model_id: classifier.model_id().to_string(),
        latency_ms,
        created_ts: now_ms(),
    })
}

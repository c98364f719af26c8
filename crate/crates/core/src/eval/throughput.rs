use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::{ChunkInput, Classifier};
use crate::pipeline::{build_test_pipeline, SamplingStrategy, TransformConfig};

/// Fewer samples than this give unstable rates.
pub const MIN_THROUGHPUT_SAMPLES: usize = 10;

// one measurement at a time so concurrent runs do not skew each other
static MEASUREMENT: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone)]
pub struct ChunkSample {
    pub chunk_id: String,
    pub storage_key: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub model_id: String,
    pub samples: usize,
    pub seconds: f64,
    pub samples_per_second: f64,
}

impl ThroughputReport {
    fn new(model_id: &str, samples: usize, seconds: f64) -> Self {
        let samples_per_second = if seconds > 0.0 { samples as f64 / seconds } else { 0.0 };
        ThroughputReport { model_id: model_id.to_string(), samples, seconds, samples_per_second }
    }

    /// Rate with two decimals.
    pub fn rate_display(&self) -> String {
        format!("{:.2}", self.samples_per_second)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ThroughputError {
    #[error("need at least {MIN_THROUGHPUT_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} ({chunk_id}) failed: {cause}; {} samples completed", partial.samples)]
    Aborted { index: usize, chunk_id: String, cause: String, partial: ThroughputReport },
}

/// Samples per second over one sequential pass, preprocessing included.
pub fn measure_throughput(
    classifier: &dyn Classifier,
    samples: &[ChunkSample],
    strategy: &SamplingStrategy,
    cfg: &TransformConfig,
) -> Result<ThroughputReport, ThroughputError> {
    if samples.len() < MIN_THROUGHPUT_SAMPLES {
        return Err(ThroughputError::TooFewSamples(samples.len()));
    }
    let _guard = MEASUREMENT.lock().unwrap_or_else(|p| p.into_inner());
    let started = Instant::now();
    for (index, s) in samples.iter().enumerate() {
        let result = (|| {
            let batch = if classifier.needs_batch() {
                Some(build_test_pipeline(&s.bytes, strategy, cfg).map_err(|e| e.to_string())?)
            } else {
                None
            };
            let input =
                ChunkInput { chunk_id: &s.chunk_id, storage_key: &s.storage_key, bytes: &s.bytes, batch: batch.as_ref() };
            classifier.classify(&input).map_err(|e| e.to_string())
        })();
        if let Err(cause) = result {
            let partial = ThroughputReport::new(classifier.model_id(), index, started.elapsed().as_secs_f64());
            return Err(ThroughputError::Aborted { index, chunk_id: s.chunk_id.clone(), cause, partial });
        }
    }
    Ok(ThroughputReport::new(classifier.model_id(), samples.len(), started.elapsed().as_secs_f64()))
}

use super::{ChunkInput, ClassifyError, Classifier, Concurrency, Prediction};
use crate::label::{argmax, ClassLabel, ScoreVector};
use crate::svf::{SvfError, SvfHeader, HEADER_LEN};

/// Probability given to each non-winning class.
pub const STUB_SCORE_FLOOR: f64 = 0.01;

/// Majority vote over the per-frame ground-truth codes of an SVF chunk.
///
/// Ties resolve to the lowest class index. Scores are one-hot with a 0.01
/// floor on the other classes.
pub fn stub_classify(chunk: &[u8]) -> Result<(ClassLabel, ScoreVector), SvfError> {
    let counts = action_code_histogram(chunk)?;
    let label = ClassLabel::from_code(argmax(&counts.map(|c| c as f64)) as u8).expect("4 classes");
    Ok((label, ScoreVector::smoothed_one_hot(label, STUB_SCORE_FLOOR)))
}

/// Counts frames per action code without touching pixel data.
pub fn action_code_histogram(chunk: &[u8]) -> Result<[u64; 4], SvfError> {
    let header = SvfHeader::decode(chunk)?;
    let expected = header.file_len();
    if chunk.len() != expected {
        return Err(SvfError::Truncated { expected, actual: chunk.len() });
    }
    let mut counts = [0u64; 4];
    for (i, rec) in chunk[HEADER_LEN..].chunks_exact(header.record_len()).enumerate() {
        let code = rec[0];
        if code > 3 {
            return Err(SvfError::InvalidFrame { frame: i as u32, what: "action code", value: code });
        }
        counts[code as usize] += 1;
    }
    Ok(counts)
}

/// Deterministic classifier reading the labels embedded in fixtures.
#[derive(Debug, Clone, Default)]
pub struct StubClassifier;

impl StubClassifier {
    pub const MODEL_ID: &'static str = "stub-majority";
}

impl Classifier for StubClassifier {
    fn model_id(&self) -> &str {
        Self::MODEL_ID
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    fn needs_batch(&self) -> bool {
        false
    }

    fn classify(&self, input: &ChunkInput<'_>) -> Result<Prediction, ClassifyError> {
        let (label, scores) =
            stub_classify(input.bytes).map_err(|e| ClassifyError::InvalidInput(e.to_string()))?;
        Ok(Prediction { label, scores })
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::math::{log_softmax, softmax, ClassWeights};
use super::{motion_features, ChunkInput, ClassifyError, Classifier, Concurrency, Prediction, MOTION_FEATURES};
use crate::label::{ClassLabel, ScoreVector, NUM_CLASSES};

/// Identifies the featurizer a [`ToyClassifier`] was trained against.
pub const FEATURE_SPEC: &str = "motion-energy/grid4x4/v1";

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no training samples")]
    Empty,
    #[error("class {0} has no training samples")]
    EmptyClass(ClassLabel),
    #[error("sample {index} has {got} features, expected {expected}")]
    Dimension { index: usize, got: usize, expected: usize },
    #[error("non-finite loss {loss} at epoch {epoch} (learning rate {learning_rate}, previous loss {previous})")]
    NonFinite { epoch: usize, loss: f64, previous: f64, learning_rate: f64 },
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatures {
    pub features: Vec<f64>,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weights: ClassWeights,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig { epochs: 300, learning_rate: 0.05, weights: ClassWeights::default(), seed: 0 }
    }
}

/// Weighted loss after each epoch; `losses[0]` is the initial loss.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub losses: Vec<f64>,
}

/// Linear softmax classifier over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyClassifier {
    /// One row of class weights per feature.
    pub weights: Vec<[f64; NUM_CLASSES]>,
    pub bias: [f64; NUM_CLASSES],
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub feature_spec: String,
}

impl ToyClassifier {
    fn init(mean: Vec<f64>, scale: Vec<f64>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..mean.len()).map(|_| [(); NUM_CLASSES].map(|_| rng.random_range(-0.01..0.01))).collect();
        ToyClassifier { weights, bias: [0.0; NUM_CLASSES], feature_mean: mean, feature_scale: scale, feature_spec: FEATURE_SPEC.into() }
    }

    pub fn num_features(&self) -> usize {
        self.weights.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.feature_mean).zip(&self.feature_scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn logits_std(&self, z: &[f64]) -> [f64; NUM_CLASSES] {
        let mut out = self.bias;
        for (zi, row) in z.iter().zip(&self.weights) {
            for k in 0..NUM_CLASSES {
                out[k] += zi * row[k];
            }
        }
        out
    }

    pub fn logits(&self, features: &[f64]) -> [f64; NUM_CLASSES] {
        self.logits_std(&self.standardize(features))
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction, ClassifyError> {
        if features.len() != self.num_features() {
            return Err(ClassifyError::InvalidInput(format!(
                "expected {} features, got {}",
                self.num_features(),
                features.len()
            )));
        }
        let probs = softmax(&self.logits(features));
        let scores = ScoreVector::new(probs).map_err(|e| ClassifyError::Unavailable(e.to_string()))?;
        Ok(Prediction { label: scores.argmax(), scores })
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite())
    }

    /// Mean weighted cross-entropy (normalized by the total sample weight)
    /// and its gradient with respect to weights and bias.
    fn loss_and_grad(
        &self,
        xs: &[Vec<f64>],
        ys: &[ClassLabel],
        w: &ClassWeights,
    ) -> (f64, Vec<[f64; NUM_CLASSES]>, [f64; NUM_CLASSES]) {
        let total_w: f64 = ys.iter().map(|y| w.get(*y)).sum();
        let mut loss = 0.0;
        let mut gw = vec![[0.0; NUM_CLASSES]; self.num_features()];
        let mut gb = [0.0; NUM_CLASSES];
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.logits_std(x);
            let wy = w.get(y) / total_w;
            loss -= wy * log_softmax(&z)[y.index()];
            let mut d = softmax(&z);
            d[y.index()] -= 1.0;
            for k in 0..NUM_CLASSES {
                let dk = wy * d[k];
                gb[k] += dk;
                for (row, xi) in gw.iter_mut().zip(x) {
                    row[k] += xi * dk;
                }
            }
        }
        (loss, gw, gb)
    }
}

/// Full-batch gradient descent of a [`ToyClassifier`] under class-weighted
/// cross-entropy. Deterministic for a given seed.
pub fn train_toy(samples: &[LabeledFeatures], cfg: &ToyTrainConfig) -> Result<(ToyClassifier, TrainingHistory), TrainError> {
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(TrainError::Config(format!("learning rate must be positive, got {}", cfg.learning_rate)));
    }
    let first = samples.first().ok_or(TrainError::Empty)?;
    let dim = first.features.len();
    for (index, s) in samples.iter().enumerate() {
        if s.features.len() != dim {
            return Err(TrainError::Dimension { index, got: s.features.len(), expected: dim });
        }
    }
    for label in ClassLabel::ALL {
        if !samples.iter().any(|s| s.label == label) {
            return Err(TrainError::EmptyClass(label));
        }
    }
    let n = samples.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| samples.iter().map(|s| s.features[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..dim)
        .map(|j| {
            let var = samples.iter().map(|s| (s.features[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let mut model = ToyClassifier::init(mean, scale, cfg.seed);
    let xs: Vec<Vec<f64>> = samples.iter().map(|s| model.standardize(&s.features)).collect();
    let ys: Vec<ClassLabel> = samples.iter().map(|s| s.label).collect();

    let mut history = TrainingHistory::default();
    let mut previous = f64::NAN;
    for epoch in 0..=cfg.epochs {
        let (loss, gw, gb) = model.loss_and_grad(&xs, &ys, &cfg.weights);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { epoch, loss, previous, learning_rate: cfg.learning_rate });
        }
        history.losses.push(loss);
        previous = loss;
        if epoch == cfg.epochs {
            break;
        }
        for (row, g) in model.weights.iter_mut().zip(&gw) {
            for (w, gk) in row.iter_mut().zip(g) {
                *w -= cfg.learning_rate * gk;
            }
        }
        for (b, gk) in model.bias.iter_mut().zip(&gb) {
            *b -= cfg.learning_rate * gk;
        }
    }
    Ok((model, history))
}

/// A trained [`ToyClassifier`] behind the classifier contract.
#[derive(Debug, Clone)]
pub struct ToyModel {
    model_id: String,
    inner: ToyClassifier,
}

impl ToyModel {
    pub fn new(model_id: impl Into<String>, inner: ToyClassifier) -> Result<Self, ClassifyError> {
        if inner.feature_spec != FEATURE_SPEC || inner.num_features() != MOTION_FEATURES {
            return Err(ClassifyError::InvalidInput(format!(
                "model expects {} ({} features), this build provides {FEATURE_SPEC} ({MOTION_FEATURES})",
                inner.feature_spec,
                inner.num_features()
            )));
        }
        if !inner.is_finite() {
            return Err(ClassifyError::InvalidInput("model has non-finite parameters".into()));
        }
        Ok(ToyModel { model_id: model_id.into(), inner })
    }

    pub fn classifier(&self) -> &ToyClassifier {
        &self.inner
    }
}

impl Classifier for ToyModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    fn classify(&self, input: &ChunkInput<'_>) -> Result<Prediction, ClassifyError> {
        let batch = input.batch.ok_or_else(|| ClassifyError::InvalidInput("toy model needs a clip batch".into()))?;
        self.inner.predict(&motion_features(batch)?)
    }
}

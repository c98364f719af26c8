use serde::{Deserialize, Serialize};

use crate::label::{ClassLabel, NUM_CLASSES};

/// Per-class multipliers on the cross-entropy term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassWeights([f64; NUM_CLASSES]);

impl Default for ClassWeights {
    /// Down-weights the over-represented Normal class.
    fn default() -> Self {
        ClassWeights([1.0, 1.0, 1.0, 0.3])
    }
}

impl ClassWeights {
    pub const UNIFORM: ClassWeights = ClassWeights([1.0; NUM_CLASSES]);

    pub fn new(w: [f64; NUM_CLASSES]) -> Result<Self, String> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(format!("class weights must be finite and non-negative, got {w:?}"));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err("at least one class weight must be positive".into());
        }
        Ok(ClassWeights(w))
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ClassWeights {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let arr: [f64; NUM_CLASSES] =
            v.as_slice().try_into().map_err(|_| format!("expected {NUM_CLASSES} class weights, got {}", v.len()))?;
        ClassWeights::new(arr)
    }
}

impl From<ClassWeights> for Vec<f64> {
    fn from(w: ClassWeights) -> Vec<f64> {
        w.0.to_vec()
    }
}

/// Log-softmax with max subtraction.
pub fn log_softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.map(|z| z - max - log_z)
}

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|z| (z - max).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

/// `-w[label] * log softmax(logits)[label]`.
pub fn weighted_ce(logits: &[f64; NUM_CLASSES], label: ClassLabel, w: &ClassWeights) -> f64 {
    -w.get(label) * log_softmax(logits)[label.index()]
}

/// Gradient of [`weighted_ce`] with respect to the logits:
/// `w[label] * (softmax(logits) - onehot(label))`.
pub fn weighted_ce_grad(logits: &[f64; NUM_CLASSES], label: ClassLabel, w: &ClassWeights) -> [f64; NUM_CLASSES] {
    let wl = w.get(label);
    let mut g = softmax(logits);
    g[label.index()] -= 1.0;
    g.map(|x| wl * x)
}

use serde::{Deserialize, Serialize};

/// Descriptive metadata for a candidate deep model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCard {
    pub model_id: String,
    /// Percent.
    pub mean_class_accuracy: f64,
    /// Samples per second.
    pub throughput: f64,
    /// Millions of parameters.
    pub params: f64,
    pub gflops: f64,
    pub train_hours_total: f64,
    /// Hours until validation mean class accuracy first exceeded 90%;
    /// `None` if it never did.
    pub train_hours_to_90: Option<f64>,
    #[serde(default)]
    pub epochs_to_90: Option<u32>,
}

impl ModelCard {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("mean_class_accuracy", Some(self.mean_class_accuracy)),
            ("throughput", Some(self.throughput)),
            ("params", Some(self.params)),
            ("gflops", Some(self.gflops)),
            ("train_hours_total", Some(self.train_hours_total)),
            ("train_hours_to_90", self.train_hours_to_90),
        ];
        for (name, value) in fields {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(format!("{}: {name} must be non-negative, got {v}", self.model_id));
                }
            }
        }
        Ok(())
    }
}

const REFERENCE_CARDS: &str = include_str!("../../data/model_cards.json");

/// Model cards of the six fine-tuned video transformers and CNNs that were
/// benchmarked for this task.
pub fn reference_model_cards() -> Vec<ModelCard> {
    serde_json::from_str(REFERENCE_CARDS).expect("bundled model cards are valid")
}

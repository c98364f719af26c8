use serde::{Deserialize, Serialize};

use crate::label::{ClassLabel, NUM_CLASSES};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("{truths} truths but {predictions} predictions")]
    LengthMismatch { truths: usize, predictions: usize },
    #[error("macro metrics need exactly one entry per class, got {0:?}")]
    Classes(Vec<ClassLabel>),
}

/// Rounds a fraction to a percentage with two decimals, for reporting.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

/// Rows are true labels, columns predicted labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn get(&self, truth: ClassLabel, predicted: ClassLabel) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, truth: ClassLabel) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn col_sum(&self, predicted: ClassLabel) -> u64 {
        self.counts.iter().map(|row| row[predicted.index()]).sum()
    }

    /// trace / total; 0 for an empty matrix.
    pub fn micro_accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

pub fn confusion_from_records(truths: &[ClassLabel], predictions: &[ClassLabel]) -> Result<ConfusionMatrix, MetricsError> {
    if truths.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch { truths: truths.len(), predictions: predictions.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truths.iter().zip(predictions) {
        cm.add(t, p);
    }
    Ok(cm)
}

/// Class-wise recall, precision and F1 as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassLabel,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when a zero denominator forced a ratio to 0.
    pub degenerate: bool,
}

impl ClassMetrics {
    pub fn from_counts(class: ClassLabel, tp: u64, fn_: u64, fp: u64) -> Self {
        let mut degenerate = false;
        let mut ratio = |num: u64, den: u64| {
            if den == 0 {
                degenerate = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let recall = ratio(tp, tp + fn_);
        let precision = ratio(tp, tp + fp);
        let f1 = if recall + precision > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate = true;
            0.0
        };
        ClassMetrics { class, tp, fn_, fp, recall, precision, f1, degenerate }
    }
}

/// tp is the diagonal cell, fn the rest of the row, fp the rest of the column.
pub fn class_metrics(cm: &ConfusionMatrix, class: ClassLabel) -> ClassMetrics {
    let tp = cm.get(class, class);
    ClassMetrics::from_counts(class, tp, cm.row_sum(class) - tp, cm.col_sum(class) - tp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub macro_recall: f64,
    pub macro_precision: f64,
    /// Mean of class F1 scores, not the F1 of the macro averages.
    pub macro_f1: f64,
}

/// Unweighted means over the four classes.
pub fn macro_metrics(per_class: &[ClassMetrics]) -> Result<MacroMetrics, MetricsError> {
    let mut classes: Vec<ClassLabel> = per_class.iter().map(|m| m.class).collect();
    classes.sort();
    if classes != ClassLabel::ALL {
        return Err(MetricsError::Classes(per_class.iter().map(|m| m.class).collect()));
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / NUM_CLASSES as f64;
    Ok(MacroMetrics {
        macro_recall: mean(|m| m.recall),
        macro_precision: mean(|m| m.precision),
        macro_f1: mean(|m| m.f1),
    })
}

impl ConfusionMatrix {
    pub fn all_class_metrics(&self) -> [ClassMetrics; NUM_CLASSES] {
        ClassLabel::ALL.map(|c| class_metrics(self, c))
    }

    pub fn macro_metrics(&self) -> MacroMetrics {
        macro_metrics(&self.all_class_metrics()).expect("all four classes")
    }
}

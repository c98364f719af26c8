use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of output classes.
pub const NUM_CLASSES: usize = 4;

/// The four scenarios a chunk is classified into.
///
/// Discriminants are the wire/annotation integer codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum ClassLabel {
    Falling = 0,
    Staggering = 1,
    ChestPain = 2,
    Normal = 3,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Falling,
        ClassLabel::Staggering,
        ClassLabel::ChestPain,
        ClassLabel::Normal,
    ];

    pub const CRITICAL: [ClassLabel; 3] = [
        ClassLabel::Falling,
        ClassLabel::Staggering,
        ClassLabel::ChestPain,
    ];

    pub fn from_code(code: u8) -> Option<ClassLabel> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Critical classes raise alerts.
    pub fn is_critical(self) -> bool {
        self != ClassLabel::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Falling => "Falling",
            ClassLabel::Staggering => "Staggering",
            ClassLabel::ChestPain => "ChestPain",
            ClassLabel::Normal => "Normal",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<ClassLabel> for u8 {
    fn from(l: ClassLabel) -> u8 {
        l.code()
    }
}

impl TryFrom<u8> for ClassLabel {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        ClassLabel::from_code(code).ok_or_else(|| format!("label out of range: {code}"))
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    /// Accepts the integer code or the class name (case-insensitive).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(code) = s.parse::<u8>() {
            return ClassLabel::try_from(code);
        }
        let lower = s.to_ascii_lowercase().replace(['_', ' ', '-'], "");
        ClassLabel::ALL
            .into_iter()
            .find(|l| l.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| format!("unknown class label: {s}"))
    }
}

/// Tolerance on the unit-sum constraint of a [`ScoreVector`].
pub const SCORE_SUM_TOLERANCE: f64 = 1e-6;

/// A probability vector over the four classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreVector([f64; NUM_CLASSES]);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("expected {NUM_CLASSES} scores, got {0}")]
    Length(usize),
    #[error("score {index} = {value} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("scores sum to {0}, expected 1")]
    Sum(f64),
}

impl ScoreVector {
    pub fn new(scores: [f64; NUM_CLASSES]) -> Result<Self, ScoreError> {
        for (index, &value) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ScoreError::OutOfRange { index, value });
            }
        }
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() > SCORE_SUM_TOLERANCE {
            return Err(ScoreError::Sum(sum));
        }
        Ok(ScoreVector(scores))
    }

    /// One-hot on `label` with every other class lifted to `floor`.
    ///
    /// `floor` must lie in `[0, 1/4]`.
    pub fn smoothed_one_hot(label: ClassLabel, floor: f64) -> Self {
        let mut s = [floor; NUM_CLASSES];
        s[label.index()] = 1.0 - floor * (NUM_CLASSES - 1) as f64;
        ScoreVector(s)
    }

    pub fn as_array(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    pub fn get(&self, label: ClassLabel) -> f64 {
        self.0[label.index()]
    }

    /// Highest-scoring class; ties go to the lowest class index.
    pub fn argmax(&self) -> ClassLabel {
        ClassLabel::from_code(argmax(&self.0) as u8).expect("index < 4")
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = ScoreError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        let arr: [f64; NUM_CLASSES] = v.as_slice().try_into().map_err(|_| ScoreError::Length(v.len()))?;
        ScoreVector::new(arr)
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(s: ScoreVector) -> Vec<f64> {
        s.0.to_vec()
    }
}

/// Index of the maximum; the first maximum wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

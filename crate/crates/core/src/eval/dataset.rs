use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::label::ClassLabel;
use crate::svf::NUM_NORMAL_SUBTYPES;

/// The 40 daily activities pooled into the Normal class, indexed by subtype.
pub const NORMAL_ACTION_NAMES: [&str; NUM_NORMAL_SUBTYPES as usize] = [
    "drink water",
    "eat meal",
    "brush teeth",
    "brush hair",
    "drop",
    "pick up",
    "throw",
    "sit down",
    "stand up",
    "clapping",
    "reading",
    "writing",
    "tear up paper",
    "put on jacket",
    "take off jacket",
    "put on a shoe",
    "take off a shoe",
    "put on glasses",
    "take off glasses",
    "put on a hat/cap",
    "take off a hat/cap",
    "cheer up",
    "hand waving",
    "kicking something",
    "reach into pocket",
    "hopping",
    "jump up",
    "phone call",
    "play with phone/tablet",
    "type on a keyboard",
    "point to something",
    "taking a selfie",
    "check time (from watch)",
    "rub two hands",
    "nod head/bow",
    "shake head",
    "wipe face",
    "salute",
    "put palms together",
    "cross hands in front",
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DatasetError {
    #[error("duplicate path {0:?}")]
    DuplicatePath(String),
    #[error("{path}: normal subtype given for {label}")]
    SubtypeOnCritical { path: String, label: ClassLabel },
    #[error("{path}: normal subtype {subtype} out of range")]
    SubtypeRange { path: String, subtype: u8 },
    #[error("class {label} has {count} samples, at least {min} required to split")]
    ClassTooSmall { label: ClassLabel, count: usize, min: usize },
    #[error("invalid split fractions: {0}")]
    Fractions(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub relative_path: String,
    pub label: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_subtype: Option<u8>,
}

/// A labeled list of videos.
///
/// Subtypes are optional: annotation files do not carry them.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        let m = DatasetManifest { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.relative_path.as_str()) {
                return Err(DatasetError::DuplicatePath(e.relative_path.clone()));
            }
            if let Some(subtype) = e.normal_subtype {
                if e.label != ClassLabel::Normal {
                    return Err(DatasetError::SubtypeOnCritical { path: e.relative_path.clone(), label: e.label });
                }
                if subtype >= NUM_NORMAL_SUBTYPES {
                    return Err(DatasetError::SubtypeRange { path: e.relative_path.clone(), subtype });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for e in &self.entries {
            counts[e.label.index()] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.75, val: 0.125, test: 0.125, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(DatasetError::Fractions(format!("{parts:?} outside [0, 1]")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Fractions(format!("{parts:?} do not sum to 1")));
        }
        Ok(())
    }

    /// (train, val, test) sizes for a class of `n`. Validation and test
    /// round half to even; train takes the remainder.
    pub fn class_sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = (self.val * n as f64).round_ties_even() as usize;
        let test = ((self.test * n as f64).round_ties_even() as usize).min(n - val);
        (n - val - test, val, test)
    }
}

/// Smallest class size accepted by [`stratified_split`].
pub const MIN_CLASS_SIZE: usize = 8;

/// Per-class shuffled split. Within each split the entries keep their
/// manifest order.
pub fn stratified_split(
    manifest: &DatasetManifest,
    spec: &SplitSpec,
) -> Result<(DatasetManifest, DatasetManifest, DatasetManifest), DatasetError> {
    spec.validate()?;
    manifest.validate()?;
    let counts = manifest.class_counts();
    for label in ClassLabel::ALL {
        if counts[label.index()] < MIN_CLASS_SIZE {
            return Err(DatasetError::ClassTooSmall { label, count: counts[label.index()], min: MIN_CLASS_SIZE });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // 0 = train, 1 = val, 2 = test
    let mut assignment = vec![0u8; manifest.len()];
    for label in ClassLabel::ALL {
        let mut idx: Vec<usize> =
            manifest.entries.iter().enumerate().filter(|(_, e)| e.label == label).map(|(i, _)| i).collect();
        idx.shuffle(&mut rng);
        let (_, val, test) = spec.class_sizes(idx.len());
        for &i in &idx[..val] {
            assignment[i] = 1;
        }
        for &i in &idx[val..val + test] {
            assignment[i] = 2;
        }
    }
    let pick = |which: u8| DatasetManifest {
        entries: manifest.entries.iter().zip(&assignment).filter(|(_, a)| **a == which).map(|(e, _)| e.clone()).collect(),
    };
    Ok((pick(0), pick(1), pick(2)))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct AnnotationError {
    /// 1-based; 0 for errors not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for AnnotationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "{}, line {}", self.message, self.line)
        }
    }
}

/// One `<relative_path> <label_int>` line per entry, LF-terminated.
pub fn write_annotation_file(manifest: &DatasetManifest) -> Result<Vec<u8>, AnnotationError> {
    let mut out = String::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        if e.relative_path.is_empty() || e.relative_path.contains(['\n', '\r']) || e.relative_path.trim() != e.relative_path {
            return Err(AnnotationError { line: i + 1, message: format!("unwritable path {:?}", e.relative_path) });
        }
        out.push_str(&e.relative_path);
        out.push(' ');
        out.push_str(&e.label.code().to_string());
        out.push('\n');
    }
    Ok(out.into_bytes())
}

pub fn parse_annotation_file(bytes: &[u8]) -> Result<DatasetManifest, AnnotationError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| AnnotationError { line: 0, message: format!("not UTF-8: {e}") })?;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let err = |message: &str| AnnotationError { line: i + 1, message: message.to_string() };
        let (path, label) = line.rsplit_once(' ').ok_or_else(|| err("expected `<path> <label>`"))?;
        if path.is_empty() || path.trim() != path {
            return Err(err("malformed path"));
        }
        let code: u8 = label.parse().map_err(|_| err("label is not an integer"))?;
        let label = ClassLabel::from_code(code).ok_or_else(|| err("label out of range"))?;
        if !seen.insert(path) {
            return Err(err("duplicate path"));
        }
        entries.push(ManifestEntry { relative_path: path.to_string(), label, normal_subtype: None });
    }
    Ok(DatasetManifest { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn synthetic(sizes: [usize; 4]) -> DatasetManifest {
        let mut entries = Vec::new();
        for label in ClassLabel::ALL {
            for i in 0..sizes[label.index()] {
                entries.push(ManifestEntry {
                    relative_path: format!("{}/{i:05}.svf", label.name()),
                    label,
                    normal_subtype: (label == ClassLabel::Normal).then_some((i % 40) as u8),
                });
            }
        }
        DatasetManifest::new(entries).unwrap()
    }

    #[test]
    fn class_sizes_follow_table_rounding() {
        let s = SplitSpec::default();
        assert_eq!(s.class_sizes(948), (712, 118, 118));
        assert_eq!(s.class_sizes(3200), (2400, 400, 400));
        assert_eq!(s.class_sizes(8), (6, 1, 1));
    }

    #[test]
    fn split_is_deterministic_partition() {
        let m = synthetic([20, 21, 22, 80]);
        let spec = SplitSpec { seed: 5, ..Default::default() };
        let a = stratified_split(&m, &spec).unwrap();
        assert_eq!(a, stratified_split(&m, &spec).unwrap());
        assert_ne!(a, stratified_split(&m, &SplitSpec { seed: 6, ..spec }).unwrap());
        let mut all: Vec<_> = a.0.entries.iter().chain(&a.1.entries).chain(&a.2.entries).map(|e| e.relative_path.clone()).collect();
        all.sort();
        let mut orig: Vec<_> = m.entries.iter().map(|e| e.relative_path.clone()).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn tiny_class_rejected() {
        let err = stratified_split(&synthetic([8, 7, 8, 8]), &SplitSpec::default()).unwrap_err();
        assert_eq!(err, DatasetError::ClassTooSmall { label: ClassLabel::Staggering, count: 7, min: 8 });
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let spec = SplitSpec { train: 0.7, ..Default::default() };
        assert!(stratified_split(&synthetic([8; 4]), &spec).is_err());
    }

    #[test]
    fn manifest_invariants() {
        let e = |p: &str, l, s| ManifestEntry { relative_path: p.into(), label: l, normal_subtype: s };
        assert!(DatasetManifest::new(vec![e("a", ClassLabel::Normal, None), e("a", ClassLabel::Normal, None)]).is_err());
        assert!(DatasetManifest::new(vec![e("a", ClassLabel::Falling, Some(1))]).is_err());
        assert!(DatasetManifest::new(vec![e("a", ClassLabel::Normal, Some(40))]).is_err());
    }

    #[test]
    fn annotation_line_format() {
        let m = DatasetManifest::new(vec![ManifestEntry {
            relative_path: "a/b.svf".into(),
            label: ClassLabel::Falling,
            normal_subtype: None,
        }])
        .unwrap();
        assert_eq!(write_annotation_file(&m).unwrap(), b"a/b.svf 0\n");
    }

    #[test]
    fn annotation_round_trip() {
        let mut m = synthetic([3, 3, 3, 5]);
        for e in &mut m.entries {
            e.normal_subtype = None;
        }
        m.entries[0].relative_path = "dir with space/x.svf".into();
        assert_eq!(parse_annotation_file(&write_annotation_file(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn annotation_errors_carry_line_numbers() {
        assert_eq!(parse_annotation_file(b"x.svf 9").unwrap_err().to_string(), "label out of range, line 1");
        assert_eq!(parse_annotation_file(b"a 0\nb\n").unwrap_err().line, 2);
        assert_eq!(parse_annotation_file(b"a 0\na 1\n").unwrap_err().to_string(), "duplicate path, line 2");
        assert_eq!(parse_annotation_file(b"a x\n").unwrap_err().line, 1);
        assert!(parse_annotation_file(b"").unwrap().is_empty());
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label::ClassLabel;

/// A labeled prediction, with the Normal subtype for Normal-truth samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub truth: ClassLabel,
    pub predicted: ClassLabel,
    #[serde(default)]
    pub normal_subtype: Option<u8>,
}

/// Normal-truth samples predicted as each critical class, grouped by
/// subtype name: count descending, then name ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisclassBreakdown(pub BTreeMap<ClassLabel, Vec<(String, u64)>>);

impl MisclassBreakdown {
    pub fn get(&self, class: ClassLabel) -> &[(String, u64)] {
        self.0.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MisclassError {
    #[error("record {0} has Normal truth but no subtype")]
    MissingSubtype(usize),
    #[error("record {index} has subtype {subtype} with only {known} names")]
    UnknownSubtype { index: usize, subtype: u8, known: usize },
}

pub fn misclass_breakdown(records: &[EvalRecord], subtype_names: &[&str]) -> Result<MisclassBreakdown, MisclassError> {
    let mut counts: BTreeMap<ClassLabel, BTreeMap<&str, u64>> =
        ClassLabel::CRITICAL.iter().map(|&c| (c, BTreeMap::new())).collect();
    for (index, r) in records.iter().enumerate() {
        if r.truth != ClassLabel::Normal {
            continue;
        }
        let subtype = r.normal_subtype.ok_or(MisclassError::MissingSubtype(index))?;
        let name = *subtype_names.get(subtype as usize).ok_or(MisclassError::UnknownSubtype {
            index,
            subtype,
            known: subtype_names.len(),
        })?;
        if r.predicted.is_critical() {
            *counts.get_mut(&r.predicted).unwrap().entry(name).or_default() += 1;
        }
    }
    Ok(MisclassBreakdown(
        counts
            .into_iter()
            .map(|(class, by_name)| {
                let mut list: Vec<(String, u64)> = by_name.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
                list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                (class, list)
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::NORMAL_ACTION_NAMES;
    use ClassLabel::*;

    fn normal(pred: ClassLabel, name: &str) -> EvalRecord {
        let subtype = NORMAL_ACTION_NAMES.iter().position(|n| *n == name).unwrap() as u8;
        EvalRecord { truth: Normal, predicted: pred, normal_subtype: Some(subtype) }
    }

    #[test]
    fn no_normal_errors_gives_empty_lists() {
        let recs = vec![normal(Normal, "throw"), EvalRecord { truth: Falling, predicted: Staggering, normal_subtype: None }];
        let b = misclass_breakdown(&recs, &NORMAL_ACTION_NAMES).unwrap();
        assert!(ClassLabel::CRITICAL.iter().all(|&c| b.get(c).is_empty()));
        assert_eq!(b.0.len(), 3);
    }

    #[test]
    fn ties_sort_alphabetically() {
        let recs = vec![
            normal(Staggering, "throw"),
            normal(Staggering, "hopping"),
            normal(Staggering, "throw"),
            normal(Staggering, "hopping"),
            normal(Staggering, "put on a shoe"),
        ];
        let b = misclass_breakdown(&recs, &NORMAL_ACTION_NAMES).unwrap();
        assert_eq!(
            b.get(Staggering),
            &[("hopping".to_string(), 2), ("throw".to_string(), 2), ("put on a shoe".to_string(), 1)]
        );
    }

    #[test]
    fn missing_subtype_is_error() {
        let recs = vec![EvalRecord { truth: Normal, predicted: Falling, normal_subtype: None }];
        assert_eq!(misclass_breakdown(&recs, &NORMAL_ACTION_NAMES), Err(MisclassError::MissingSubtype(0)));
    }
}

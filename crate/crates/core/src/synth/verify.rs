use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::diagnosis::{DiagnosedLedger, ErrorType};
use crate::error::{HoiError, Result};
use crate::matching::prediction;

use super::ScenarioTruth;

/// What the generator intended against what the classifier found. `None`
/// stands for "no error" (a TP, or a ground-truth triplet that was covered).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ConfusionEntry {
    pub intended: Option<ErrorType>,
    pub detected: Option<ErrorType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    /// `pred:<file index>` or `gt:<image id>#<pair>:<action>`.
    pub item: String,
    pub intended: Option<ErrorType>,
    pub detected: Option<ErrorType>,
}

/// Counts per (intended, detected); clean TPs are left out.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    #[serde(serialize_with = "entries")]
    pub counts: BTreeMap<ConfusionEntry, usize>,
    pub mismatches: Vec<Mismatch>,
}

fn entries<S: serde::Serializer>(
    m: &BTreeMap<ConfusionEntry, usize>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Row<'a> {
        intended: Option<&'a str>,
        detected: Option<&'a str>,
        count: usize,
    }
    s.collect_seq(m.iter().map(|(e, n)| Row {
        intended: e.intended.map(ErrorType::name),
        detected: e.detected.map(ErrorType::name),
        count: *n,
    }))
}

impl ConfusionMatrix {
    pub fn is_diagonal(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn get(&self, intended: Option<ErrorType>, detected: Option<ErrorType>) -> usize {
        self.counts
            .get(&ConfusionEntry { intended, detected })
            .copied()
            .unwrap_or(0)
    }

    fn add(
        &mut self,
        item: impl FnOnce() -> String,
        intended: Option<ErrorType>,
        detected: Option<ErrorType>,
    ) {
        if intended.is_none() && detected.is_none() {
            return;
        }
        *self
            .counts
            .entry(ConfusionEntry { intended, detected })
            .or_default() += 1;
        if intended != detected {
            self.mismatches.push(Mismatch {
                item: item(),
                intended,
                detected,
            });
        }
    }
}

/// Compares a diagnosis of `truth` with what was injected.
pub fn verify(truth: &ScenarioTruth, diagnosed: &DiagnosedLedger) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::default();
    let mut seen = 0;
    let mut by_source: Vec<(usize, Option<ErrorType>)> = diagnosed
        .ledger
        .records()
        .map(|(_, r)| {
            (
                prediction(&truth.predictions, r.prediction).source_index,
                r.error,
            )
        })
        .collect();
    by_source.sort_unstable_by_key(|(s, _)| *s);
    for (src, detected) in by_source {
        let intended = *truth.labels.get(src).ok_or_else(|| HoiError::Computation {
            stage: "verify",
            message: format!("prediction {src} has no intended label"),
        })?;
        m.add(|| format!("pred:{src}"), intended, detected);
        seen += 1;
    }
    if seen != truth.labels.len() {
        return Err(HoiError::Computation {
            stage: "verify",
            message: format!(
                "{seen} diagnosed predictions for {} intended labels",
                truth.labels.len()
            ),
        });
    }

    let detected: BTreeSet<_> = diagnosed.missed.values().flatten().copied().collect();
    for t in truth.missed.union(&detected) {
        let name = || {
            format!(
                "gt:{}#{}:{}",
                truth.dataset.image(t.image as usize).id,
                t.pair,
                t.action.0
            )
        };
        let flag = |s: &BTreeSet<_>| s.contains(t).then_some(ErrorType::MissedGt);
        m.add(name, flag(&truth.missed), flag(&detected));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::classify_errors;
    use crate::matching::match_triplets;
    use crate::synth::{generate, InjectionCounts, ScenarioSpec};

    fn diagnose(t: &ScenarioTruth) -> DiagnosedLedger {
        classify_errors(
            &match_triplets(&t.dataset, &t.predictions, 0.5),
            &t.dataset,
            &t.predictions,
            0.5,
        )
    }

    #[test]
    fn clean_scenario_has_empty_matrix() {
        let t = generate(&ScenarioSpec::single_error(1, ErrorType::Duplicate, 0, 50)).unwrap();
        let m = verify(&t, &diagnose(&t)).unwrap();
        assert!(m.counts.is_empty());
        assert!(m.is_diagonal());
    }

    #[test]
    fn single_duplicate() {
        let t = generate(&ScenarioSpec::single_error(2, ErrorType::Duplicate, 1, 20)).unwrap();
        let m = verify(&t, &diagnose(&t)).unwrap();
        assert_eq!(m.counts.len(), 1);
        assert_eq!(
            m.get(Some(ErrorType::Duplicate), Some(ErrorType::Duplicate)),
            1
        );
    }

    #[test]
    fn every_type_alone_is_recovered() {
        for e in ErrorType::ALL {
            let t = generate(&ScenarioSpec::single_error(3, e, 50, 50)).unwrap();
            let m = verify(&t, &diagnose(&t)).unwrap();
            assert!(m.is_diagonal(), "{e}: {:?}", m.mismatches);
            assert_eq!(m.get(Some(e), Some(e)), 50, "{e}");
        }
    }

    #[test]
    fn mixed_scenario_is_recovered() {
        let spec = ScenarioSpec {
            seed: 11,
            images: 60,
            counts: InjectionCounts {
                clean_tp: 120,
                human_box: 15,
                object_box: 15,
                both_boxes: 15,
                association: 15,
                duplicate: 15,
                action: 15,
                missed_gt: 15,
            },
            ..Default::default()
        };
        let t = generate(&spec).unwrap();
        let m = verify(&t, &diagnose(&t)).unwrap();
        assert!(m.is_diagonal(), "{:?}", m.mismatches);
    }

    #[test]
    fn relabeled_prediction_is_reported() {
        let mut t = generate(&ScenarioSpec::single_error(4, ErrorType::Action, 3, 10)).unwrap();
        let i = t
            .labels
            .iter()
            .position(|l| *l == Some(ErrorType::Action))
            .unwrap();
        t.labels[i] = Some(ErrorType::HumanBox);
        let m = verify(&t, &diagnose(&t)).unwrap();
        assert_eq!(m.get(Some(ErrorType::HumanBox), Some(ErrorType::Action)), 1);
        assert_eq!(
            m.mismatches,
            vec![Mismatch {
                item: format!("pred:{i}"),
                intended: Some(ErrorType::HumanBox),
                detected: Some(ErrorType::Action),
            }]
        );
    }
}

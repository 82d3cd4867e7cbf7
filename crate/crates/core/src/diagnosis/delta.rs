//! ΔmAP per oracle, overall and over the rare and non-rare splits.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::Result;
use crate::matching::MatchLedger;
use crate::metrics::{category_aps, mean_of, RareSplit};
use crate::vocab::HoiCategory;

use super::{DiagnosedLedger, OracleRegistry};

/// mAP as a fraction; a split is `None` when none of its categories has ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapSummary {
    pub overall: Option<f64>,
    pub rare: Option<f64>,
    pub non_rare: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleDelta {
    pub oracle: String,
    pub map: MapSummary,
    pub delta: MapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaMapReport {
    pub baseline: MapSummary,
    pub oracles: Vec<OracleDelta>,
}

impl DeltaMapReport {
    pub fn get(&self, oracle: &str) -> Option<&OracleDelta> {
        self.oracles.iter().find(|o| o.oracle == oracle)
    }
}

fn summarize(
    ledger: &MatchLedger,
    split: &RareSplit,
    subset: Option<&BTreeSet<HoiCategory>>,
) -> MapSummary {
    let aps = category_aps(ledger);
    let restrict = |s: &BTreeSet<HoiCategory>| -> BTreeSet<HoiCategory> {
        match subset {
            Some(sub) => s.intersection(sub).copied().collect(),
            None => s.clone(),
        }
    };
    MapSummary {
        overall: mean_of(&aps, subset).ok(),
        rare: mean_of(&aps, Some(&restrict(&split.rare))).ok(),
        non_rare: mean_of(&aps, Some(&restrict(&split.non_rare))).ok(),
    }
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// Applies every oracle in `registry` to the baseline independently.
///
/// Fails when the baseline mAP itself is undefined. An oracle that leaves no
/// category with ground truth (the FN oracle on a detector without TPs)
/// reports `None`.
pub fn delta_map(
    diagnosed: &DiagnosedLedger,
    registry: &OracleRegistry,
    split: &RareSplit,
    subset: Option<&BTreeSet<HoiCategory>>,
) -> Result<DeltaMapReport> {
    mean_of(&category_aps(&diagnosed.ledger), subset)?;
    let baseline = summarize(&diagnosed.ledger, split, subset);
    let oracles = registry
        .iter()
        .map(|o| {
            let map = summarize(&o.apply(diagnosed).ledger, split, subset);
            OracleDelta {
                oracle: o.name().to_string(),
                delta: MapSummary {
                    overall: diff(map.overall, baseline.overall),
                    rare: diff(map.rare, baseline.rare),
                    non_rare: diff(map.non_rare, baseline.non_rare),
                },
                map,
            }
        })
        .collect();
    Ok(DeltaMapReport { baseline, oracles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnosis::classify_errors;
    use crate::matching::fixtures::*;
    use crate::matching::match_triplets;
    use crate::metrics::rare_split;
    use serde_json::json;

    fn at(i: usize) -> ([f64; 4], [f64; 4]) {
        let d = i as f64 * 300.;
        ([d, 0., d + 100., 200.], [d + 100., 100., d + 200., 200.])
    }

    #[test]
    fn perfect_predictions_have_zero_deltas() {
        let gts: Vec<_> = (0..3).map(|i| gt(at(i).0, at(i).1, 1, &[1])).collect();
        let items = (0..3)
            .map(|i| p("a", at(i).0, at(i).1, 1, 1, 0.5 + i as f64 * 0.1))
            .collect();
        let ds = dataset(json!([{"id": "a", "gt_pairs": gts}]));
        let ps = preds(&ds, items);
        let d = classify_errors(&match_triplets(&ds, &ps, 0.5), &ds, &ps, 0.5);
        let r = delta_map(&d, &OracleRegistry::builtin(), &rare_split(&ds, 10), None).unwrap();
        assert_eq!(r.baseline.overall, Some(1.0));
        assert_eq!(r.oracles.len(), 9);
        for o in &r.oracles {
            assert_eq!(o.delta.overall, Some(0.0), "{}", o.oracle);
        }
        assert_eq!(r.baseline.non_rare, None);
    }

    #[test]
    fn undefined_baseline_is_an_error() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": []}]));
        let ps = preds(&ds, vec![]);
        let d = classify_errors(&match_triplets(&ds, &ps, 0.5), &ds, &ps, 0.5);
        assert!(delta_map(&d, &OracleRegistry::builtin(), &rare_split(&ds, 10), None).is_err());
    }

    #[test]
    fn fn_without_tps_is_undefined() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(at(0).0, at(0).1, 1, &[1])]}]));
        let ps = preds(&ds, vec![]);
        let d = classify_errors(&match_triplets(&ds, &ps, 0.5), &ds, &ps, 0.5);
        let r = delta_map(&d, &OracleRegistry::builtin(), &rare_split(&ds, 10), None).unwrap();
        assert_eq!(r.baseline.overall, Some(0.0));
        assert_eq!(r.get("fn").unwrap().map.overall, None);
        assert_eq!(r.get("missed_gt").unwrap().map.overall, None);
        assert_eq!(r.get("fp").unwrap().delta.overall, Some(0.0));
    }
}

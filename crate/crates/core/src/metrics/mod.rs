//! Precision/recall metrics over match ledgers.
//!
//! Library functions return fractions in `[0, 1]`; reports scale to percent.

mod curve;
mod interaction;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use curve::{average_precision, binary_ap, pr_curve, PrCurve, PrPoint};
pub use interaction::{action_map, negative_pair_ap, ActionMap};

use crate::error::{HoiError, Result};
use crate::ingest::Dataset;
use crate::matching::MatchLedger;
use crate::pairs::PairLedger;
use crate::vocab::HoiCategory;

pub const DEFAULT_RARE_THRESHOLD: usize = 10;

/// AP for every category in the ledger; `None` where N_GT is zero.
pub fn category_aps(ledger: &MatchLedger) -> BTreeMap<HoiCategory, Option<f64>> {
    ledger
        .categories
        .iter()
        .map(|(c, l)| (*c, average_precision(&pr_curve(l))))
        .collect()
}

/// Mean of the defined APs, optionally restricted to `subset`.
pub fn mean_of(
    aps: &BTreeMap<HoiCategory, Option<f64>>,
    subset: Option<&BTreeSet<HoiCategory>>,
) -> Result<f64> {
    let defined: Vec<f64> = aps
        .iter()
        .filter(|(c, _)| subset.is_none_or(|s| s.contains(c)))
        .filter_map(|(_, ap)| *ap)
        .collect();
    if defined.is_empty() {
        return Err(HoiError::Undefined(
            "mAP over an empty category set (no category with ground truth)".into(),
        ));
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn mean_ap(ledger: &MatchLedger, subset: Option<&BTreeSet<HoiCategory>>) -> Result<f64> {
    mean_of(&category_aps(ledger), subset)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RareSplit {
    pub threshold: usize,
    pub rare: BTreeSet<HoiCategory>,
    pub non_rare: BTreeSet<HoiCategory>,
}

/// A category is rare when it has fewer than `threshold` ground-truth triplets.
pub fn rare_split(dataset: &Dataset, threshold: usize) -> RareSplit {
    let (rare, non_rare): (BTreeSet<_>, BTreeSet<_>) = dataset
        .categories()
        .partition(|c| dataset.count(*c) < threshold);
    RareSplit {
        threshold,
        rare,
        non_rare,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMetrics {
    /// Matched ground-truth pairs over all ground-truth pairs.
    pub recall: f64,
    /// Matched detections over all detected pairs; 0 when nothing was detected.
    pub precision: f64,
    pub precision_defined: bool,
    /// Unique detected pairs per image.
    pub mean_pairs_per_image: f64,
    /// Per-image recall averaged over images that have ground truth.
    pub macro_recall: f64,
}

pub fn pair_metrics(ledger: &PairLedger) -> Result<PairMetrics> {
    let n_gt = ledger.n_gt();
    if n_gt == 0 {
        return Err(HoiError::Undefined(
            "pair recall with zero ground-truth pairs".into(),
        ));
    }
    let n_tp = ledger.n_tp();
    let n_det = ledger.n_detected();
    let per_image: Vec<f64> = ledger
        .gt_pairs_per_image
        .iter()
        .zip(&ledger.tp_per_image)
        .filter(|(g, _)| **g > 0)
        .map(|(g, t)| *t as f64 / *g as f64)
        .collect();
    Ok(PairMetrics {
        recall: n_tp as f64 / n_gt as f64,
        precision: if n_det == 0 {
            0.0
        } else {
            n_tp as f64 / n_det as f64
        },
        precision_defined: n_det > 0,
        mean_pairs_per_image: if ledger.num_images() == 0 {
            0.0
        } else {
            n_det as f64 / ledger.num_images() as f64
        },
        macro_recall: per_image.iter().sum::<f64>() / per_image.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::fixtures::*;
    use crate::matching::match_triplets;
    use crate::pairs::match_pairs;
    use serde_json::json;

    #[test]
    fn mean_of_defined_only() {
        let aps = BTreeMap::from([
            (HoiCategory::new(1, 1), Some(1.0)),
            (HoiCategory::new(1, 3), Some(0.0)),
            (HoiCategory::new(2, 2), None),
        ]);
        assert_eq!(mean_of(&aps, None).unwrap(), 0.5);
        let one = BTreeSet::from([HoiCategory::new(1, 3)]);
        assert_eq!(mean_of(&aps, Some(&one)).unwrap(), 0.0);
        let undefined = BTreeSet::from([HoiCategory::new(2, 2)]);
        assert!(mean_of(&aps, Some(&undefined)).is_err());
        assert!(mean_of(&aps, Some(&BTreeSet::new())).is_err());
    }

    #[test]
    fn multi_category_mean() {
        // per-category verdict lists and N_GT, with hand-derived APs:
        // [T] n=1 -> 1; [F,T] n=2 -> 1/4; [T,F,T] n=2 -> 5/6; [T] n=2 -> 1/2
        let x = |dx: f64| [dx, 0., dx + 100., 200.];
        let o = |dx: f64| [dx + 100., 100., dx + 200., 200.];
        let ds = dataset(json!([
            {"id": "a", "gt_pairs": [gt(x(0.), o(0.), 1, &[1, 3]), gt(x(1000.), o(1000.), 1, &[3])]},
            {"id": "b", "gt_pairs": [gt(x(0.), o(0.), 2, &[2, 3]), gt(x(1000.), o(1000.), 2, &[3])]},
            {"id": "c", "gt_pairs": [gt(x(0.), o(0.), 2, &[2])]}
        ]));
        let far = [5000., 5000., 5100., 5100.];
        let ps = preds(
            &ds,
            vec![
                p("a", x(0.), o(0.), 1, 1, 0.9),
                p("a", far, far, 1, 3, 0.9),
                p("a", x(0.), o(0.), 1, 3, 0.8),
                p("b", x(0.), o(0.), 2, 2, 0.9),
                p("b", far, far, 2, 2, 0.8),
                p("c", x(0.), o(0.), 2, 2, 0.7),
                p("b", x(0.), o(0.), 2, 3, 0.9),
            ],
        );
        let l = match_triplets(&ds, &ps, 0.5);
        let aps = category_aps(&l);
        assert_eq!(aps[&HoiCategory::new(1, 1)], Some(1.0));
        assert_eq!(aps[&HoiCategory::new(1, 3)], Some(0.5 * 0.5));
        assert!((aps[&HoiCategory::new(2, 2)].unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(aps[&HoiCategory::new(2, 3)], Some(0.5));
        let expected = (1.0 + 0.25 + 5.0 / 6.0 + 0.5) / 4.0;
        assert!((mean_ap(&l, None).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn rare_boundary() {
        let pairs = |n: usize, obj: u32| -> Vec<serde_json::Value> {
            (0..n)
                .map(|i| {
                    let d = i as f64 * 300.;
                    gt(
                        [d, 0., d + 100., 200.],
                        [d + 100., 100., d + 200., 200.],
                        obj,
                        &[if obj == 1 { 1 } else { 2 }],
                    )
                })
                .collect()
        };
        let ds = dataset(json!([
            {"id": "a", "gt_pairs": pairs(9, 1)},
            {"id": "b", "gt_pairs": pairs(10, 2)}
        ]));
        let s = rare_split(&ds, 10);
        assert!(s.rare.contains(&HoiCategory::new(1, 1)));
        assert!(s.non_rare.contains(&HoiCategory::new(2, 2)));
        // zero-count categories are rare
        assert!(s.rare.contains(&HoiCategory::new(1, 3)));
        assert!(s.rare.is_disjoint(&s.non_rare));
        assert_eq!(s.rare.len() + s.non_rare.len(), ds.categories().count());
    }

    fn grid_gt(n: usize) -> Vec<serde_json::Value> {
        (0..n)
            .map(|i| {
                let d = i as f64 * 300.;
                gt(
                    [d, 0., d + 100., 200.],
                    [d + 100., 100., d + 200., 200.],
                    1,
                    &[1],
                )
            })
            .collect()
    }

    #[test]
    fn pair_metrics_perfect() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": grid_gt(3)}]));
        let items = (0..3)
            .map(|i| {
                let d = i as f64 * 300.;
                p(
                    "a",
                    [d, 0., d + 100., 200.],
                    [d + 100., 100., d + 200., 200.],
                    1,
                    1,
                    0.9,
                )
            })
            .collect();
        let m = pair_metrics(&match_pairs(&ds, &preds(&ds, items), 0.5)).unwrap();
        assert_eq!((m.recall, m.precision), (1.0, 1.0));
        assert_eq!(m.mean_pairs_per_image, 3.0);
    }

    #[test]
    fn pair_metrics_one_spurious_per_gt() {
        let ds = dataset(
            json!([{"id": "a", "gt_pairs": grid_gt(2)}, {"id": "b", "gt_pairs": grid_gt(1)}]),
        );
        let mut items = Vec::new();
        for (img, n) in [("a", 2), ("b", 1)] {
            for i in 0..n {
                let d = i as f64 * 300.;
                items.push(p(
                    img,
                    [d, 0., d + 100., 200.],
                    [d + 100., 100., d + 200., 200.],
                    1,
                    1,
                    0.9,
                ));
                items.push(p(
                    img,
                    [d, 1000., d + 100., 1200.],
                    [d, 1000., d + 50., 1100.],
                    1,
                    1,
                    0.5,
                ));
            }
        }
        let m = pair_metrics(&match_pairs(&ds, &preds(&ds, items), 0.5)).unwrap();
        assert_eq!((m.recall, m.precision), (1.0, 0.5));
        assert_eq!(m.mean_pairs_per_image, 3.0);
        assert_eq!(m.macro_recall, 1.0);
    }

    #[test]
    fn pair_metrics_no_detections() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": grid_gt(2)}]));
        let m = pair_metrics(&match_pairs(&ds, &preds(&ds, vec![]), 0.5)).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 0.0);
        assert!(!m.precision_defined);
    }

    #[test]
    fn pair_metrics_zero_gt_errors() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": []}]));
        assert!(pair_metrics(&match_pairs(&ds, &preds(&ds, vec![]), 0.5)).is_err());
    }

    #[test]
    fn duplicates_keep_recall_and_lower_precision() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": grid_gt(2)}]));
        let base: Vec<_> = (0..2)
            .map(|i| {
                let d = i as f64 * 300.;
                p(
                    "a",
                    [d, 0., d + 100., 200.],
                    [d + 100., 100., d + 200., 200.],
                    1,
                    1,
                    0.9,
                )
            })
            .collect();
        let m0 = pair_metrics(&match_pairs(&ds, &preds(&ds, base.clone()), 0.5)).unwrap();
        let mut dup = base;
        dup.push(p(
            "a",
            [1., 0., 101., 200.],
            [100., 100., 200., 200.],
            1,
            1,
            0.3,
        ));
        let m1 = pair_metrics(&match_pairs(&ds, &preds(&ds, dup), 0.5)).unwrap();
        assert_eq!(m0.recall, m1.recall);
        assert!(m1.precision < m0.precision);
    }
}

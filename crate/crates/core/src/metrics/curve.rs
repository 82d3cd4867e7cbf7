//! Cumulative precision/recall and all-point interpolated AP.
//!
//! Predictions sharing a confidence value cannot be separated by any
//! threshold, so each tie group contributes a single curve point. With
//! distinct confidences this is exactly one point per rank.

use serde::Serialize;

use crate::matching::CategoryLedger;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub recall: f64,
    pub precision: f64,
    /// Highest precision at this or any lower threshold.
    pub interpolated: f64,
    #[serde(skip)]
    tp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve {
    pub n_gt: usize,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Builds the curve from `(confidence, is_positive)` items sorted by
    /// descending confidence.
    pub fn from_ranked(ranked: impl IntoIterator<Item = (f64, bool)>, n_gt: usize) -> Self {
        let mut points: Vec<PrPoint> = Vec::new();
        let (mut tp, mut seen) = (0usize, 0usize);
        let mut ranked = ranked.into_iter().peekable();
        while let Some((conf, pos)) = ranked.next() {
            seen += 1;
            tp += pos as usize;
            if ranked.peek().is_some_and(|(next, _)| *next == conf) {
                continue;
            }
            points.push(PrPoint {
                confidence: conf,
                recall: if n_gt == 0 {
                    0.0
                } else {
                    tp as f64 / n_gt as f64
                },
                precision: tp as f64 / seen as f64,
                interpolated: 0.0,
                tp,
            });
        }
        let mut running = 0.0f64;
        for p in points.iter_mut().rev() {
            running = running.max(p.precision);
            p.interpolated = running;
        }
        Self { n_gt, points }
    }

    /// AP is undefined without ground truth.
    pub fn is_defined(&self) -> bool {
        self.n_gt > 0
    }

    pub fn max_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.recall)
    }
}

pub fn pr_curve(ledger: &CategoryLedger) -> PrCurve {
    PrCurve::from_ranked(
        ledger.records.iter().map(|r| (r.confidence, r.is_tp())),
        ledger.n_gt,
    )
}

/// `sum_k (R_k - R_{k-1}) * P_interp(k)` with `R_0 = 0`; `None` when undefined.
pub fn average_precision(curve: &PrCurve) -> Option<f64> {
    if !curve.is_defined() {
        return None;
    }
    let mut prev_tp = 0usize;
    let mut acc = 0.0;
    for p in &curve.points {
        acc += (p.tp - prev_tp) as f64 * p.interpolated;
        prev_tp = p.tp;
    }
    Some((acc / curve.n_gt as f64).min(1.0))
}

/// AP of a binary ranking where every positive is present in `scored`.
pub fn binary_ap(mut scored: Vec<(f64, bool)>) -> Option<f64> {
    let n_pos = scored.iter().filter(|(_, p)| *p).count();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    average_precision(&PrCurve::from_ranked(scored, n_pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranked(v: &[bool]) -> Vec<(f64, bool)> {
        v.iter()
            .enumerate()
            .map(|(i, &p)| (1.0 - i as f64 * 0.01, p))
            .collect()
    }

    /// Independent route: sweep each distinct threshold, then integrate the
    /// precision envelope `max{P(t) : R(t) >= r}` over the distinct recall levels.
    fn sweep_ap(items: &[(f64, bool)], n_gt: usize) -> f64 {
        let mut thresholds: Vec<f64> = items.iter().map(|x| x.0).collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let pts: Vec<(f64, f64)> = thresholds
            .iter()
            .map(|&t| {
                let kept: Vec<_> = items.iter().filter(|x| x.0 >= t).collect();
                let tp = kept.iter().filter(|x| x.1).count() as f64;
                (tp / n_gt as f64, tp / kept.len() as f64)
            })
            .collect();
        let mut levels: Vec<f64> = pts.iter().map(|p| p.0).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let mut prev = 0.0;
        let mut ap = 0.0;
        for r in levels {
            let env = pts
                .iter()
                .filter(|p| p.0 >= r)
                .map(|p| p.1)
                .fold(0.0, f64::max);
            ap += (r - prev) * env;
            prev = r;
        }
        ap
    }

    #[test]
    fn full_depth_precision() {
        let c = PrCurve::from_ranked(ranked(&[true, true, true, false]), 5);
        let last = c.points.last().unwrap();
        assert_eq!(last.precision, 0.75);
        assert_eq!(last.recall, 3.0 / 5.0);
    }

    #[test]
    fn perfect_detector() {
        let c = PrCurve::from_ranked(ranked(&[true; 4]), 4);
        let last = c.points.last().unwrap();
        assert_eq!((last.recall, last.precision), (1.0, 1.0));
        assert_eq!(average_precision(&c), Some(1.0));
    }

    #[test]
    fn interpolation_suffix_max() {
        let c = PrCurve::from_ranked(ranked(&[true, false, true]), 2);
        let interp: Vec<f64> = c.points.iter().map(|p| p.interpolated).collect();
        assert_eq!(interp, vec![1.0, 2.0 / 3.0, 2.0 / 3.0]);
        let ap = average_precision(&c).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert!((sweep_ap(&ranked(&[true, false, true]), 2) - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn all_false_positives() {
        let c = PrCurve::from_ranked(ranked(&[false; 3]), 2);
        assert_eq!(average_precision(&c), Some(0.0));
    }

    #[test]
    fn undefined_without_gt() {
        let c = PrCurve::from_ranked(ranked(&[false; 3]), 0);
        assert_eq!(average_precision(&c), None);
    }

    #[test]
    fn ties_collapse_to_one_point() {
        let c = PrCurve::from_ranked(
            vec![(0.5, false), (0.5, true), (0.5, true), (0.2, false)],
            2,
        );
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.points[0].precision, 2.0 / 3.0);
        assert!((average_precision(&c).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binary_constant_scores_give_prevalence() {
        let items = vec![
            (0.3, true),
            (0.3, false),
            (0.3, false),
            (0.3, true),
            (0.3, false),
        ];
        assert!((binary_ap(items).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn binary_single_positive_last() {
        for k in 1..8usize {
            let mut items: Vec<(f64, bool)> =
                (0..k - 1).map(|i| (0.9 - i as f64 * 0.05, false)).collect();
            items.push((0.01, true));
            let ap = binary_ap(items.clone()).unwrap();
            assert!((ap - 1.0 / k as f64).abs() < 1e-15);
            assert!((sweep_ap(&items, 1) - ap).abs() < 1e-12);
        }
    }

    fn arb_items() -> impl Strategy<Value = (Vec<(f64, bool)>, usize)> {
        prop::collection::vec((0u8..20, any::<bool>()), 0..16).prop_flat_map(|v| {
            let tp = v.iter().filter(|x| x.1).count();
            let items: Vec<(f64, bool)> =
                v.into_iter().map(|(c, p)| (c as f64 / 20.0, p)).collect();
            (Just(items), tp.max(1)..tp.max(1) + 6)
        })
    }

    fn sorted(mut v: Vec<(f64, bool)>) -> Vec<(f64, bool)> {
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }

    proptest! {
        #[test]
        fn matches_threshold_sweep((items, n_gt) in arb_items()) {
            let items = sorted(items);
            let ap = average_precision(&PrCurve::from_ranked(items.clone(), n_gt)).unwrap();
            prop_assert!((ap - sweep_ap(&items, n_gt)).abs() < 1e-9);
        }

        #[test]
        fn bounded_by_max_recall((items, n_gt) in arb_items()) {
            let c = PrCurve::from_ranked(sorted(items), n_gt);
            let ap = average_precision(&c).unwrap();
            prop_assert!(ap >= 0.0 && ap <= c.max_recall() + 1e-12 && c.max_recall() <= 1.0);
            for w in c.points.windows(2) {
                prop_assert!(w[0].recall <= w[1].recall);
                prop_assert!(w[0].interpolated >= w[1].interpolated);
            }
        }

        #[test]
        fn trailing_fp_never_helps((items, n_gt) in arb_items()) {
            let items = sorted(items);
            let base = average_precision(&PrCurve::from_ranked(items.clone(), n_gt)).unwrap();
            let mut more = items.clone();
            more.push((-1.0, false));
            prop_assert!(average_precision(&PrCurve::from_ranked(more, n_gt)).unwrap() <= base + 1e-12);
        }

        #[test]
        fn leading_tp_never_hurts((items, n_gt) in arb_items()) {
            let items = sorted(items);
            let base = average_precision(&PrCurve::from_ranked(items.clone(), n_gt + 1)).unwrap();
            let mut more = vec![(2.0, true)];
            more.extend(items);
            prop_assert!(average_precision(&PrCurve::from_ranked(more, n_gt + 1)).unwrap() >= base - 1e-12);
        }
    }
}

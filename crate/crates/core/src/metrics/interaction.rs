//! Interaction-classification metrics on pair-matched detections.

use std::collections::BTreeMap;

use serde::Serialize;

use super::binary_ap;
use crate::bbox::ActionId;
use crate::ingest::Dataset;
use crate::pairs::{PairLedger, PairVerdict};
use crate::vocab::HoiCategory;

/// AP of separating negative pairs (covering no ground truth) from correctly
/// localized ones, scoring each pair as `1 - max_i p_i`. Duplicate detections
/// of already matched pairs localize correctly and are left out. `None` when
/// there is no negative pair.
pub fn negative_pair_ap(ledger: &PairLedger) -> Option<f64> {
    let scored: Vec<(f64, bool)> = ledger
        .pairs
        .iter()
        .filter_map(|d| match d.verdict {
            PairVerdict::Duplicate { .. } => None,
            v => Some((1.0 - d.max_action_score(), v == PairVerdict::Negative)),
        })
        .collect();
    if !scored.iter().any(|s| s.1) {
        return None;
    }
    binary_ap(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionMap {
    /// `None` for actions without a positive among the localized pairs.
    pub per_action: BTreeMap<ActionId, Option<f64>>,
    pub map: Option<f64>,
}

/// Per-action AP over correctly localized pairs, ignoring detection scores.
///
/// For action `a`, every matched pair whose object category admits `a` is a
/// candidate, positive when its ground-truth pair carries `a`, scored by the
/// pair's action score for `a` (0 if the detector never proposed it).
pub fn action_map(ledger: &PairLedger, dataset: &Dataset) -> ActionMap {
    let vocab = dataset.vocabulary();
    let mut per_action_items: BTreeMap<ActionId, Vec<(f64, bool)>> = BTreeMap::new();
    for cat in vocab.evaluated_categories() {
        per_action_items.entry(cat.action).or_default();
    }

    for d in &ledger.pairs {
        let PairVerdict::Tp { pair } = d.verdict else {
            continue;
        };
        let gt = &dataset.image(d.image as usize).pairs[pair as usize];
        for (&action, items) in per_action_items.iter_mut() {
            let cat = HoiCategory {
                object: d.object.category(),
                action,
            };
            if vocab.is_evaluated(cat) {
                items.push((d.action_score(action), gt.actions.contains(&action)));
            }
        }
    }

    let per_action: BTreeMap<ActionId, Option<f64>> = per_action_items
        .into_iter()
        .map(|(a, items)| (a, binary_ap(items)))
        .collect();
    let defined: Vec<f64> = per_action.values().filter_map(|v| *v).collect();
    let map = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    ActionMap { per_action, map }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::fixtures::*;
    use crate::pairs::match_pairs;
    use serde_json::json;

    fn at(i: usize) -> ([f64; 4], [f64; 4]) {
        let d = i as f64 * 300.;
        ([d, 0., d + 100., 200.], [d + 100., 100., d + 200., 200.])
    }

    fn far(i: usize) -> ([f64; 4], [f64; 4]) {
        let d = i as f64 * 300.;
        (
            [d, 1000., d + 100., 1200.],
            [d + 100., 1100., d + 200., 1200.],
        )
    }

    #[test]
    fn perfect_separation() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(at(0).0, at(0).1, 1, &[1])]}]));
        let mut items = vec![p("a", at(0).0, at(0).1, 1, 1, 1.0)];
        for i in 0..3 {
            items.push(p("a", far(i).0, far(i).1, 1, 1, 0.0));
        }
        let l = match_pairs(&ds, &preds(&ds, items), 0.5);
        assert_eq!(negative_pair_ap(&l), Some(1.0));
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let ds = dataset(
            json!([{"id": "a", "gt_pairs": [gt(at(0).0, at(0).1, 1, &[1]), gt(at(1).0, at(1).1, 1, &[1])]}]),
        );
        let mut items = vec![
            p("a", at(0).0, at(0).1, 1, 1, 0.5),
            p("a", at(1).0, at(1).1, 1, 1, 0.5),
        ];
        for i in 0..3 {
            items.push(p("a", far(i).0, far(i).1, 1, 1, 0.5));
        }
        let l = match_pairs(&ds, &preds(&ds, items), 0.5);
        assert!((negative_pair_ap(&l).unwrap() - 3.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_negative_ranked_last() {
        for k in 2..6usize {
            let gts: Vec<_> = (0..k - 1).map(|i| gt(at(i).0, at(i).1, 1, &[1])).collect();
            let ds = dataset(json!([{"id": "a", "gt_pairs": gts}]));
            // positives have low max score -> high negative score; the negative scores highest
            let mut items: Vec<_> = (0..k - 1)
                .map(|i| p("a", at(i).0, at(i).1, 1, 1, 0.1 + 0.01 * i as f64))
                .collect();
            items.push(p("a", far(0).0, far(0).1, 1, 1, 0.9));
            let l = match_pairs(&ds, &preds(&ds, items), 0.5);
            assert!((negative_pair_ap(&l).unwrap() - 1.0 / k as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn no_negatives_is_undefined() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(at(0).0, at(0).1, 1, &[1])]}]));
        let l = match_pairs(
            &ds,
            &preds(&ds, vec![p("a", at(0).0, at(0).1, 1, 1, 0.5)]),
            0.5,
        );
        assert_eq!(negative_pair_ap(&l), None);
    }

    #[test]
    fn duplicates_left_out() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(at(0).0, at(0).1, 1, &[1])]}]));
        let shifted = [1., 0., 101., 200.];
        let items = vec![
            p("a", at(0).0, at(0).1, 1, 1, 0.9),
            p("a", shifted, at(0).1, 1, 1, 0.0),
            p("a", far(0).0, far(0).1, 1, 1, 0.5),
        ];
        let l = match_pairs(&ds, &preds(&ds, items), 0.5);
        // the duplicate would otherwise outrank the negative
        assert_eq!(negative_pair_ap(&l), Some(1.0));
    }

    #[test]
    fn perfect_action_classifier() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [
            gt(at(0).0, at(0).1, 2, &[2, 3]), gt(at(1).0, at(1).1, 2, &[2]), gt(at(2).0, at(2).1, 1, &[1])
        ]}]));
        let items = vec![
            p("a", at(0).0, at(0).1, 2, 2, 1.0),
            p("a", at(0).0, at(0).1, 2, 3, 1.0),
            p("a", at(1).0, at(1).1, 2, 2, 1.0),
            p("a", at(2).0, at(2).1, 1, 1, 1.0),
        ];
        let l = match_pairs(&ds, &preds(&ds, items), 0.5);
        let m = action_map(&l, &ds);
        assert_eq!(m.map, Some(1.0));
    }

    #[test]
    fn unpredicted_gt_action_scores_zero() {
        // GT {catch, hold}; only catch predicted -> hold gets a score-0 positive
        let ds = dataset(json!([{"id": "a", "gt_pairs": [
            gt(at(0).0, at(0).1, 2, &[2, 3]), gt(at(1).0, at(1).1, 2, &[2])
        ]}]));
        let items = vec![
            p("a", at(0).0, at(0).1, 2, 2, 0.8),
            p("a", at(1).0, at(1).1, 2, 2, 0.6),
            p("a", at(1).0, at(1).1, 2, 3, 0.4),
        ];
        let l = match_pairs(&ds, &preds(&ds, items), 0.5);
        let m = action_map(&l, &ds);
        // hold: pair1 negative scored 0.4, pair0 positive scored 0 -> P at full recall 1/2
        assert_eq!(m.per_action[&ActionId(3)], Some(0.5));
        assert_eq!(m.per_action[&ActionId(2)], Some(1.0));
        // ride has no positive among localized pairs
        assert_eq!(m.per_action[&ActionId(1)], None);
        assert_eq!(m.map, Some(0.75));
    }

    /// Exhaustive threshold oracle for one action's candidate list.
    fn sweep(items: &[(f64, bool)]) -> f64 {
        let n_pos = items.iter().filter(|x| x.1).count() as f64;
        let mut ts: Vec<f64> = items.iter().map(|x| x.0).collect();
        ts.sort_by(|a, b| b.total_cmp(a));
        ts.dedup();
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let k: Vec<_> = items.iter().filter(|x| x.0 >= t).collect();
                let tp = k.iter().filter(|x| x.1).count() as f64;
                (tp / n_pos, tp / k.len() as f64)
            })
            .collect();
        let mut prev = 0.0;
        let mut ap = 0.0;
        let mut levels: Vec<f64> = pts.iter().map(|p| p.0).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for r in levels {
            ap += (r - prev)
                * pts
                    .iter()
                    .filter(|p| p.0 >= r)
                    .map(|p| p.1)
                    .fold(0.0, f64::max);
            prev = r;
        }
        ap
    }

    #[test]
    fn three_pair_mixed_scores() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [
            gt(at(0).0, at(0).1, 2, &[2]), gt(at(1).0, at(1).1, 2, &[3]), gt(at(2).0, at(2).1, 2, &[2, 3])
        ]}]));
        let items = vec![
            p("a", at(0).0, at(0).1, 2, 2, 0.3),
            p("a", at(0).0, at(0).1, 2, 3, 0.7),
            p("a", at(1).0, at(1).1, 2, 2, 0.6),
            p("a", at(1).0, at(1).1, 2, 3, 0.2),
            p("a", at(2).0, at(2).1, 2, 2, 0.5),
        ];
        let l = match_pairs(&ds, &preds(&ds, items), 0.5);
        let m = action_map(&l, &ds);
        let catch = sweep(&[(0.3, true), (0.6, false), (0.5, true)]);
        let hold = sweep(&[(0.7, false), (0.2, true), (0.0, true)]);
        assert!((m.per_action[&ActionId(2)].unwrap() - catch).abs() < 1e-12);
        assert!((m.per_action[&ActionId(3)].unwrap() - hold).abs() < 1e-12);
        assert!((m.map.unwrap() - (catch + hold) / 2.0).abs() < 1e-12);
    }
}

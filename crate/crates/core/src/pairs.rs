//! Pair-level matching that ignores action labels.
//!
//! Triplets sharing identical boxes are folded into one detected pair that
//! keeps the highest triplet confidence and, per action, the highest action
//! score. Detected pairs are then assigned greedily to ground-truth pairs.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::bbox::{iou, ActionId, BoundingBox};
use crate::ingest::{pair_cmp, Dataset, PairKey, PredictionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairVerdict {
    /// Matched this ground-truth pair.
    Tp { pair: u32 },
    /// Localizes a ground-truth pair that an earlier detection already claimed.
    Duplicate { pair: u32 },
    /// Covers no ground-truth pair: a negative pair.
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectedPair {
    pub image: u32,
    pub human: BoundingBox,
    pub object: BoundingBox,
    /// Highest triplet confidence among the folded triplets.
    pub confidence: f64,
    /// Highest action score per predicted action.
    pub action_scores: BTreeMap<ActionId, f64>,
    pub verdict: PairVerdict,
}

impl DetectedPair {
    pub fn max_action_score(&self) -> f64 {
        self.action_scores.values().copied().fold(0.0, f64::max)
    }

    pub fn action_score(&self, action: ActionId) -> f64 {
        self.action_scores.get(&action).copied().unwrap_or(0.0)
    }

    pub fn is_tp(&self) -> bool {
        matches!(self.verdict, PairVerdict::Tp { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairLedger {
    /// Grouped by image, confidence-descending within each image.
    pub pairs: Vec<DetectedPair>,
    pub gt_pairs_per_image: Vec<usize>,
    pub tp_per_image: Vec<usize>,
    pub detected_per_image: Vec<usize>,
}

impl PairLedger {
    pub fn n_gt(&self) -> usize {
        self.gt_pairs_per_image.iter().sum()
    }

    pub fn n_tp(&self) -> usize {
        self.tp_per_image.iter().sum()
    }

    pub fn n_detected(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_images(&self) -> usize {
        self.gt_pairs_per_image.len()
    }
}

pub fn match_pairs(
    dataset: &Dataset,
    predictions: &PredictionSet,
    iou_threshold: f64,
) -> PairLedger {
    let person = dataset.vocabulary().person();
    let n = dataset.images().len();
    let mut ledger = PairLedger {
        pairs: Vec::new(),
        gt_pairs_per_image: dataset.images().iter().map(|i| i.pairs.len()).collect(),
        tp_per_image: vec![0; n],
        detected_per_image: vec![0; n],
    };

    for img in 0..n {
        let preds = predictions.image(img);
        let mut slot: HashMap<PairKey, usize> = HashMap::new();
        let mut detected: Vec<DetectedPair> = Vec::new();
        let mut rep = Vec::new();
        for p in preds {
            let i = *slot.entry(PairKey(p)).or_insert_with(|| {
                detected.push(DetectedPair {
                    image: img as u32,
                    human: p.human,
                    object: p.object,
                    confidence: p.confidence(),
                    action_scores: BTreeMap::new(),
                    verdict: PairVerdict::Negative,
                });
                rep.push(p);
                detected.len() - 1
            });
            let d = &mut detected[i];
            d.confidence = d.confidence.max(p.confidence());
            let s = d.action_scores.entry(p.action).or_insert(p.action_score);
            *s = s.max(p.action_score);
        }

        let mut order: Vec<usize> = (0..detected.len()).collect();
        order.sort_by(|&a, &b| {
            detected[b]
                .confidence
                .total_cmp(&detected[a].confidence)
                .then_with(|| pair_cmp(rep[a], rep[b]))
        });

        let gts = &dataset.image(img).pairs;
        let mut taken = vec![false; gts.len()];
        for &i in &order {
            let d = &mut detected[i];
            let mut free: Option<(u32, f64)> = None;
            let mut claimed: Option<(u32, f64)> = None;
            if d.human.category() == person {
                for (g, gt) in gts.iter().enumerate() {
                    if gt.object_category() != d.object.category() {
                        continue;
                    }
                    let m = iou(&d.human, &gt.human).min(iou(&d.object, &gt.object));
                    if m <= iou_threshold {
                        continue;
                    }
                    let best = if taken[g] { &mut claimed } else { &mut free };
                    if best.is_none_or(|(_, bm)| m > bm) {
                        *best = Some((g as u32, m));
                    }
                }
            }
            d.verdict = match (free, claimed) {
                (Some((g, _)), _) => {
                    taken[g as usize] = true;
                    ledger.tp_per_image[img] += 1;
                    PairVerdict::Tp { pair: g }
                }
                (None, Some((g, _))) => PairVerdict::Duplicate { pair: g },
                (None, None) => PairVerdict::Negative,
            };
        }
        ledger.detected_per_image[img] = detected.len();
        let mut slots: Vec<Option<DetectedPair>> = detected.into_iter().map(Some).collect();
        ledger.pairs.extend(
            order
                .into_iter()
                .map(|i| slots[i].take().expect("each slot once")),
        );
    }
    ledger
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::fixtures::*;
    use serde_json::json;

    #[test]
    fn box_identical_is_tp_regardless_of_action() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(H, O, 1, &[1])]}]));
        let ps = preds(&ds, vec![p("a", H, O, 1, 3, 0.4)]);
        let l = match_pairs(&ds, &ps, 0.5);
        assert_eq!(l.pairs[0].verdict, PairVerdict::Tp { pair: 0 });
        assert_eq!(l.n_tp(), 1);
    }

    #[test]
    fn second_detection_is_duplicate() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(H, O, 1, &[1])]}]));
        let shifted = [2., 0., 102., 200.];
        let ps = preds(
            &ds,
            vec![p("a", H, O, 1, 1, 0.4), p("a", shifted, O, 1, 1, 0.6)],
        );
        let l = match_pairs(&ds, &ps, 0.5);
        assert_eq!(l.n_detected(), 2);
        assert_eq!(l.n_tp(), 1);
        assert_eq!(l.pairs[0].verdict, PairVerdict::Tp { pair: 0 });
        assert_eq!(l.pairs[0].confidence, 0.6);
        assert_eq!(l.pairs[1].verdict, PairVerdict::Duplicate { pair: 0 });
    }

    #[test]
    fn multi_action_pair_counts_once() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(H, O, 2, &[2, 3])]}]));
        let ps = preds(&ds, vec![p("a", H, O, 2, 2, 0.9), p("a", H, O, 2, 3, 0.3)]);
        let l = match_pairs(&ds, &ps, 0.5);
        assert_eq!(l.n_gt(), 1);
        assert_eq!(l.n_detected(), 1);
        assert_eq!(l.n_tp(), 1);
        let d = &l.pairs[0];
        assert_eq!(d.confidence, 0.9);
        assert_eq!(d.action_score(ActionId(3)), 0.3);
        assert_eq!(d.action_score(ActionId(1)), 0.0);
        assert_eq!(d.max_action_score(), 0.9);
    }

    #[test]
    fn far_detection_is_negative() {
        let ds = dataset(json!([{"id": "a", "gt_pairs": [gt(H, O, 1, &[1])]}]));
        let ps = preds(&ds, vec![p("a", [500., 500., 600., 600.], O, 1, 1, 0.9)]);
        let l = match_pairs(&ds, &ps, 0.5);
        assert_eq!(l.pairs[0].verdict, PairVerdict::Negative);
    }
}

//! Greedy triplet-level assignment of predictions to ground truth.
//!
//! Within each image and HOI category, predictions are visited in descending
//! confidence. A prediction is a TP when its human box is labeled person, and
//! some not-yet-matched ground-truth pair annotated with the predicted action
//! has the predicted object category and `min(IoU_h, IoU_o) > threshold`.
//! Among such pairs the one maximizing that minimum wins.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::bbox::{iou, ActionId, ObjectId};
use crate::diagnosis::ErrorType;
use crate::ingest::{Dataset, PredictionSet};
use crate::types::PredictedTriplet;
use crate::vocab::HoiCategory;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Points at `predictions.image(image)[index]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PredRef {
    pub image: u32,
    pub index: u32,
}

/// One ground-truth triplet: an annotated pair together with one of its actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GtTripletRef {
    pub image: u32,
    pub pair: u32,
    pub object: ObjectId,
    pub action: ActionId,
}

impl GtTripletRef {
    pub fn category(&self) -> HoiCategory {
        HoiCategory {
            object: self.object,
            action: self.action,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Tp,
    Fp,
}

/// Overlap with the same-category ground-truth pair maximizing `min(IoU_h, IoU_o)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlap {
    pub pair: u32,
    pub iou_human: f64,
    pub iou_object: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchRecord {
    pub prediction: PredRef,
    pub confidence: f64,
    pub verdict: Verdict,
    pub matched: Option<GtTripletRef>,
    pub best_overlap: Option<Overlap>,
    /// Filled in by error classification for FPs.
    pub error: Option<ErrorType>,
    /// Ground-truth triplet a fix-to-TP oracle would convert this FP into.
    pub fix_target: Option<GtTripletRef>,
    /// Image rank (by id) in the high half, in-image canonical index in the low half.
    #[serde(skip)]
    pub(crate) tie: u64,
}

impl MatchRecord {
    pub fn is_tp(&self) -> bool {
        self.verdict == Verdict::Tp
    }

    pub(crate) fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .confidence
            .total_cmp(&self.confidence)
            .then(self.tie.cmp(&other.tie))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CategoryLedger {
    pub n_gt: usize,
    pub records: Vec<MatchRecord>,
}

impl CategoryLedger {
    pub fn n_tp(&self) -> usize {
        self.records.iter().filter(|r| r.is_tp()).count()
    }

    pub fn n_fp(&self) -> usize {
        self.records.len() - self.n_tp()
    }

    pub(crate) fn sort(&mut self) {
        self.records.sort_by(MatchRecord::rank_cmp);
    }
}

/// Per-category, confidence-sorted match outcomes across the whole benchmark.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatchLedger {
    pub categories: BTreeMap<HoiCategory, CategoryLedger>,
    /// Predictions whose category is not evaluated (only possible for in-memory sets).
    pub unevaluated: usize,
}

impl MatchLedger {
    pub fn get(&self, cat: HoiCategory) -> Option<&CategoryLedger> {
        self.categories.get(&cat)
    }

    pub fn records(&self) -> impl Iterator<Item = (HoiCategory, &MatchRecord)> {
        self.categories
            .iter()
            .flat_map(|(c, l)| l.records.iter().map(move |r| (*c, r)))
    }

    pub fn num_records(&self) -> usize {
        self.categories.values().map(|l| l.records.len()).sum()
    }

    pub fn num_tp(&self) -> usize {
        self.categories.values().map(CategoryLedger::n_tp).sum()
    }

    /// Order-insensitive merge of two ledgers built from disjoint image shards.
    pub fn merge(mut self, other: MatchLedger) -> MatchLedger {
        for (cat, l) in other.categories {
            let e = self.categories.entry(cat).or_default();
            e.n_gt += l.n_gt;
            e.records.extend(l.records);
            e.sort();
        }
        self.unevaluated += other.unevaluated;
        self
    }
}

pub(crate) fn tie_key(rank: u32, index: usize) -> u64 {
    ((rank as u64) << 32) | index as u64
}

pub fn match_triplets(
    dataset: &Dataset,
    predictions: &PredictionSet,
    iou_threshold: f64,
) -> MatchLedger {
    match_images(
        dataset,
        predictions,
        iou_threshold,
        0..predictions.num_images(),
        true,
    )
}

/// Matches a subset of images. `count_gt` controls whether N_GT is filled in
/// from the dataset totals (set it on exactly one shard when merging).
pub fn match_images(
    dataset: &Dataset,
    predictions: &PredictionSet,
    iou_threshold: f64,
    images: impl IntoIterator<Item = usize>,
    count_gt: bool,
) -> MatchLedger {
    let mut ledger = MatchLedger::default();
    for cat in dataset.categories() {
        ledger.categories.insert(
            cat,
            CategoryLedger {
                n_gt: if count_gt { dataset.count(cat) } else { 0 },
                records: Vec::new(),
            },
        );
    }
    let person = dataset.vocabulary().person();

    for img in images {
        let pairs = &dataset.image(img).pairs;
        let rank = dataset.image_rank(img);
        // matched[pair] holds the actions already claimed by a TP
        let mut matched: Vec<Vec<ActionId>> = vec![Vec::new(); pairs.len()];

        for (idx, p) in predictions.image(img).iter().enumerate() {
            let Some(cat_ledger) = ledger.categories.get_mut(&p.category()) else {
                ledger.unevaluated += 1;
                continue;
            };
            let human_ok = p.human.category() == person;
            let mut best: Option<(u32, f64)> = None;
            let mut overlap: Option<Overlap> = None;

            for (g, gt) in pairs.iter().enumerate() {
                if gt.object_category() != p.object.category() {
                    continue;
                }
                let ih = iou(&p.human, &gt.human);
                let io = iou(&p.object, &gt.object);
                let m = ih.min(io);
                if overlap.is_none_or(|o| m > o.iou_human.min(o.iou_object)) {
                    overlap = Some(Overlap {
                        pair: g as u32,
                        iou_human: ih,
                        iou_object: io,
                    });
                }
                let eligible = human_ok
                    && ih > iou_threshold
                    && io > iou_threshold
                    && gt.actions.contains(&p.action)
                    && !matched[g].contains(&p.action);
                if eligible && best.is_none_or(|(_, bm)| m > bm) {
                    best = Some((g as u32, m));
                }
            }

            let matched_ref = best.map(|(g, _)| {
                matched[g as usize].push(p.action);
                GtTripletRef {
                    image: img as u32,
                    pair: g,
                    object: p.object.category(),
                    action: p.action,
                }
            });
            cat_ledger.records.push(MatchRecord {
                prediction: PredRef {
                    image: img as u32,
                    index: idx as u32,
                },
                confidence: p.confidence(),
                verdict: if matched_ref.is_some() {
                    Verdict::Tp
                } else {
                    Verdict::Fp
                },
                matched: matched_ref,
                best_overlap: overlap,
                error: None,
                fix_target: None,
                tie: tie_key(rank, idx),
            });
        }
    }

    for l in ledger.categories.values_mut() {
        l.sort();
    }
    ledger
}

pub(crate) fn prediction(predictions: &PredictionSet, r: PredRef) -> &PredictedTriplet {
    &predictions.image(r.image as usize)[r.index as usize]
}

#[cfg(test)]
pub(crate) mod fixtures {
    use serde_json::json;

    use crate::ingest::{
        dataset_from_file, predictions_from_file, Dataset, GtLoadOptions, PredictionSet,
    };

    /// objects: person, bicycle, frisbee; actions: no_interaction, ride, catch, hold
    pub fn dataset(images: serde_json::Value) -> Dataset {
        let v = json!({
            "vocabulary": {
                "objects": ["person", "bicycle", "frisbee"],
                "actions": ["no_interaction", "ride", "catch", "hold"],
                "valid_hoi": [[1,0],[1,1],[1,3],[2,0],[2,2],[2,3]],
                "excluded_actions": [0]
            },
            "images": images
        });
        dataset_from_file(serde_json::from_value(v).unwrap(), GtLoadOptions::default()).unwrap()
    }

    pub fn gt(h: [f64; 4], o: [f64; 4], obj: u32, actions: &[u32]) -> serde_json::Value {
        json!({"human_box": h, "object_box": o, "object_category": obj, "actions": actions})
    }

    pub fn p(
        image: &str,
        h: [f64; 4],
        o: [f64; 4],
        obj: u32,
        act: u32,
        conf: f64,
    ) -> serde_json::Value {
        json!({"image_id": image, "human_box": h, "human_score": 1.0, "object_box": o,
               "object_category": obj, "object_score": 1.0, "action": act,
               "action_score": conf})
    }

    pub fn preds(ds: &Dataset, items: Vec<serde_json::Value>) -> PredictionSet {
        let file = serde_json::from_value(json!({"predictions": items})).unwrap();
        predictions_from_file(file, ds, None).unwrap()
    }

    pub const H: [f64; 4] = [0., 0., 100., 200.];
    pub const O: [f64; 4] = [100., 100., 200., 200.];
}

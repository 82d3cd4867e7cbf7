//! Pair-level non-maximum suppression for one-stage detector outputs.

use std::collections::BTreeMap;

use crate::bbox::iou;
use crate::ingest::PredictionSet;
use crate::types::PredictedTriplet;

pub const DEFAULT_PAIR_NMS_THRESHOLD: f64 = 0.7;

/// Within each image and (object category, action) group, keeps the highest
/// confidence triplet and drops any other whose `min(IoU_h, IoU_o)` with an
/// already kept triplet exceeds `pair_iou_threshold`.
pub fn nms_pairs(predictions: &PredictionSet, pair_iou_threshold: f64) -> PredictionSet {
    let per_image = predictions
        .per_image()
        .iter()
        .map(|preds| suppress(preds, pair_iou_threshold))
        .collect();
    predictions.with_images(per_image)
}

fn suppress(preds: &[PredictedTriplet], threshold: f64) -> Vec<PredictedTriplet> {
    // input is already in canonical confidence-descending order
    let mut kept_by_group: BTreeMap<_, Vec<&PredictedTriplet>> = BTreeMap::new();
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        let kept = kept_by_group.entry(p.category()).or_default();
        let overlaps = kept
            .iter()
            .any(|k| iou(&k.human, &p.human).min(iou(&k.object, &p.object)) > threshold);
        if !overlaps {
            kept.push(p);
            out.push(p.clone());
        }
    }
    out
}

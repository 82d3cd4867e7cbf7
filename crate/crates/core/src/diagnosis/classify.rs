//! FP error typing.
//!
//! Each FP runs through a fixed cascade: box correctness (against any
//! ground-truth box in the image), then whether some annotated pair covers
//! both boxes, then whether the predicted action was already claimed on that
//! pair. Fix targets are assigned jointly per image in confidence order, so
//! two FPs competing for one pair spread over its uncovered actions.

use std::collections::{BTreeMap, HashSet};

use crate::bbox::{iou, ActionId};
use crate::ingest::{Dataset, PredictionSet};
use crate::matching::{prediction, GtTripletRef, MatchLedger, MatchRecord};
use crate::types::{GtPair, PredictedTriplet};
use crate::vocab::HoiCategory;

use super::{DiagnosedLedger, ErrorType};

pub fn classify_errors(
    ledger: &MatchLedger,
    dataset: &Dataset,
    predictions: &PredictionSet,
    iou_threshold: f64,
) -> DiagnosedLedger {
    let mut ledger = ledger.clone();
    let person = dataset.vocabulary().person();

    // (category, record position) of every FP, bucketed by image
    let mut fps: Vec<Vec<(HoiCategory, usize)>> = vec![Vec::new(); dataset.images().len()];
    let mut covered: Vec<HashSet<(u32, ActionId)>> = vec![HashSet::new(); dataset.images().len()];
    for (cat, l) in &ledger.categories {
        for (i, r) in l.records.iter().enumerate() {
            match r.matched {
                Some(m) => {
                    covered[m.image as usize].insert((m.pair, m.action));
                }
                None => fps[r.prediction.image as usize].push((*cat, i)),
            }
        }
    }

    for (img, mut bucket) in fps.into_iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        let pairs = &dataset.image(img).pairs;
        bucket.sort_by_key(|(c, i)| ledger.categories[c].records[*i].prediction.index);
        for (cat, i) in bucket {
            let rec: &mut MatchRecord = &mut ledger.categories.get_mut(&cat).unwrap().records[i];
            let p = prediction(predictions, rec.prediction);
            let (error, target) =
                classify_one(p, pairs, p.human.category() == person, iou_threshold);
            rec.error = Some(error);
            rec.fix_target = target.map(|g| {
                let action = pick_action(p.action, &pairs[g], g as u32, &covered[img]);
                covered[img].insert((g as u32, action));
                GtTripletRef {
                    image: img as u32,
                    pair: g as u32,
                    object: pairs[g].object_category(),
                    action,
                }
            });
        }
    }

    let mut missed: BTreeMap<HoiCategory, Vec<GtTripletRef>> = BTreeMap::new();
    for (img, rec) in dataset.images().iter().enumerate() {
        for (g, pair) in rec.pairs.iter().enumerate() {
            for &action in &pair.actions {
                if !covered[img].contains(&(g as u32, action)) {
                    let t = GtTripletRef {
                        image: img as u32,
                        pair: g as u32,
                        object: pair.object_category(),
                        action,
                    };
                    missed.entry(t.category()).or_default().push(t);
                }
            }
        }
    }

    DiagnosedLedger { ledger, missed }
}

/// The cascade for a single FP. Returns the error type and, for fixable
/// types, the ground-truth pair a fix would associate it with.
fn classify_one(
    p: &PredictedTriplet,
    pairs: &[GtPair],
    human_label_ok: bool,
    thr: f64,
) -> (ErrorType, Option<usize>) {
    // (human IoU, object IoU, same object category) per ground-truth pair
    type Overlaps = (f64, f64, bool);
    let overlaps: Vec<Overlaps> = pairs
        .iter()
        .map(|g| {
            let same_cat = g.object_category() == p.object.category();
            (iou(&p.human, &g.human), iou(&p.object, &g.object), same_cat)
        })
        .collect();
    let human_ok = human_label_ok && overlaps.iter().any(|o| o.0 > thr);
    let object_ok = overlaps.iter().any(|o| o.2 && o.1 > thr);

    // best candidate by `key`, ties to the lower index
    let argmax = |keep: &dyn Fn(&Overlaps) -> bool, key: &dyn Fn(&Overlaps) -> (f64, f64)| {
        let mut best: Option<(usize, (f64, f64))> = None;
        for (g, o) in overlaps.iter().enumerate().filter(|(_, o)| keep(o)) {
            let k = key(o);
            if best.is_none_or(|(_, bk)| k.0 > bk.0 || (k.0 == bk.0 && k.1 > bk.1)) {
                best = Some((g, k));
            }
        }
        best.map(|(g, _)| g)
    };

    match (human_ok, object_ok) {
        (false, false) => (ErrorType::BothBoxes, None),
        (false, true) => (
            ErrorType::HumanBox,
            argmax(&|o| o.2 && o.1 > thr, &|o| (o.1, o.0)),
        ),
        (true, false) => (
            ErrorType::ObjectBox,
            argmax(&|o| o.0 > thr, &|o| (o.0, o.1)),
        ),
        (true, true) => {
            let covers = |o: &Overlaps| o.2 && o.0 > thr && o.1 > thr;
            let covering = argmax(&covers, &|o| (o.0.min(o.1), o.0.max(o.1)));
            match covering {
                None => (
                    ErrorType::Association,
                    argmax(&|o| o.2 && o.1 > thr, &|o| (o.1, o.0)),
                ),
                Some(_)
                    if overlaps
                        .iter()
                        .zip(pairs)
                        .any(|(o, g)| covers(o) && g.actions.contains(&p.action)) =>
                {
                    (ErrorType::Duplicate, None)
                }
                Some(g) => (ErrorType::Action, Some(g)),
            }
        }
    }
}

/// The predicted action when the target pair carries it; otherwise the
/// lowest action of the pair nothing covers yet, falling back to the lowest.
fn pick_action(
    predicted: ActionId,
    pair: &GtPair,
    g: u32,
    covered: &HashSet<(u32, ActionId)>,
) -> ActionId {
    if pair.actions.contains(&predicted) {
        return predicted;
    }
    pair.actions
        .iter()
        .copied()
        .find(|a| !covered.contains(&(g, *a)))
        .unwrap_or_else(|| {
            *pair
                .actions
                .first()
                .expect("ground-truth pairs carry an action")
        })
}

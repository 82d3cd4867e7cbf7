use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::bbox::{coords_cmp, ActionId, BoundingBox, ObjectId};
use crate::error::{HoiError, Result};
use crate::vocab::HoiCategory;

/// An annotated interacting human-object pair. One pair may carry several actions.
#[derive(Debug, Clone, PartialEq)]
pub struct GtPair {
    pub human: BoundingBox,
    pub object: BoundingBox,
    pub actions: BTreeSet<ActionId>,
}

impl GtPair {
    pub fn new(
        human: BoundingBox,
        object: BoundingBox,
        actions: BTreeSet<ActionId>,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(HoiError::validation("ground-truth pair with no actions"));
        }
        Ok(Self {
            human,
            object,
            actions,
        })
    }

    pub fn object_category(&self) -> ObjectId {
        self.object.category()
    }

    pub fn categories(&self) -> impl Iterator<Item = HoiCategory> + '_ {
        let object = self.object_category();
        self.actions
            .iter()
            .map(move |&action| HoiCategory { object, action })
    }
}

/// One detector output: human box, object box and an action, each with its own score.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTriplet {
    pub human: BoundingBox,
    pub object: BoundingBox,
    pub action: ActionId,
    pub action_score: f64,
    /// Fused score for detectors that emit a single confidence.
    pub confidence: Option<f64>,
    /// Position in the source file, kept so outputs can point back at inputs.
    pub source_index: usize,
}

impl PredictedTriplet {
    pub fn category(&self) -> HoiCategory {
        HoiCategory {
            object: self.object.category(),
            action: self.action,
        }
    }

    pub fn confidence(&self) -> f64 {
        triplet_confidence(self)
    }

    /// Canonical within-image order: confidence descending, then geometry,
    /// labels and component scores. Fully identical triplets compare equal.
    pub(crate) fn canonical_cmp(&self, other: &Self) -> Ordering {
        other
            .confidence()
            .total_cmp(&self.confidence())
            .then_with(|| coords_cmp(&self.human.coords(), &other.human.coords()))
            .then_with(|| coords_cmp(&self.object.coords(), &other.object.coords()))
            .then_with(|| self.object.category().cmp(&other.object.category()))
            .then_with(|| self.action.cmp(&other.action))
            .then_with(|| self.human.category().cmp(&other.human.category()))
            .then_with(|| other.human.score().total_cmp(&self.human.score()))
            .then_with(|| other.object.score().total_cmp(&self.object.score()))
            .then_with(|| other.action_score.total_cmp(&self.action_score))
    }
}

/// The precomputed confidence when present, else `s_h * s_o * s_a`.
pub fn triplet_confidence(p: &PredictedTriplet) -> f64 {
    p.confidence
        .unwrap_or_else(|| p.human.score() * p.object.score() * p.action_score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(sh: f64, so: f64, sa: f64, fused: Option<f64>) -> PredictedTriplet {
        PredictedTriplet {
            human: BoundingBox::new([0., 0., 10., 10.], ObjectId(0), sh).unwrap(),
            object: BoundingBox::new([5., 5., 20., 20.], ObjectId(3), so).unwrap(),
            action: ActionId(2),
            action_score: sa,
            confidence: fused,
            source_index: 0,
        }
    }

    #[test]
    fn product_of_scores() {
        assert!((triplet_confidence(&pred(0.9, 0.8, 0.5, None)) - 0.36).abs() < 1e-15);
        assert_eq!(triplet_confidence(&pred(1.0, 1.0, 1.0, None)), 1.0);
    }

    #[test]
    fn precomputed_passes_through() {
        assert_eq!(triplet_confidence(&pred(0.1, 0.2, 0.3, Some(0.42))), 0.42);
    }

    #[test]
    fn empty_action_set_rejected() {
        let h = BoundingBox::annotation([0., 0., 1., 1.], ObjectId(0)).unwrap();
        assert!(GtPair::new(h, h, BTreeSet::new()).is_err());
    }

    proptest! {
        #[test]
        fn confidence_monotone(sh in 0.0..=1.0f64, so in 0.0..=1.0f64, sa in 0.0..=1.0f64, bump in 0.0..=1.0f64) {
            let base = triplet_confidence(&pred(sh, so, sa, None));
            let up = |x: f64| x + (1.0 - x) * bump;
            prop_assert!(triplet_confidence(&pred(up(sh), so, sa, None)) >= base);
            prop_assert!(triplet_confidence(&pred(sh, up(so), sa, None)) >= base);
            prop_assert!(triplet_confidence(&pred(sh, so, up(sa), None)) >= base);
        }
    }
}

//! Axis-aligned boxes in continuous pixel coordinates.
//!
//! Area is `(x2 - x1) * (y2 - y1)`; there is no `+1` pixel-inclusive convention.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HoiError, Result};

/// Index into the object vocabulary. Humans carry the vocabulary's person id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

/// Index into the action vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    category: ObjectId,
    score: f64,
}

impl BoundingBox {
    pub fn new(coords: [f64; 4], category: ObjectId, score: f64) -> Result<Self> {
        let [x1, y1, x2, y2] = coords;
        if !coords.iter().all(|c| c.is_finite()) || x2 <= x1 || y2 <= y1 {
            return Err(HoiError::DegenerateBox { x1, y1, x2, y2 });
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(HoiError::validation(format!(
                "box score {score} outside [0, 1]"
            )));
        }
        Ok(Self {
            x1,
            y1,
            x2,
            y2,
            category,
            score,
        })
    }

    /// Ground-truth boxes carry no confidence; their score is fixed at 1.
    pub fn annotation(coords: [f64; 4], category: ObjectId) -> Result<Self> {
        Self::new(coords, category, 1.0)
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn category(&self) -> ObjectId {
        self.category
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn with_category(mut self, category: ObjectId) -> Self {
        self.category = category;
        self
    }

    /// Same geometry and category, bit for bit. Scores are ignored.
    pub fn same_region(&self, other: &BoundingBox) -> bool {
        self.category == other.category && coords_cmp(&self.coords(), &other.coords()).is_eq()
    }
}

/// Intersection over union. Ignores categories and scores.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// IoU on raw corner coordinates, rejecting degenerate input.
pub fn iou_coords(a: [f64; 4], b: [f64; 4]) -> Result<f64> {
    let a = BoundingBox::annotation(a, ObjectId(0))?;
    let b = BoundingBox::annotation(b, ObjectId(0))?;
    Ok(iou(&a, &b))
}

/// Total order over coordinate arrays, used for deterministic tie-breaks.
pub(crate) fn coords_cmp(a: &[f64; 4], b: &[f64; 4]) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

//! Seeded synthetic scenarios with a known mixture of injected errors.
//!
//! Images live on a 1000×1000 canvas cut into a 4×4 grid. Every ground-truth
//! pair owns one cell (human on the left, object on the right), so boxes of
//! different pairs never overlap and cells without a pair are free space.
//! Boxes that must be wrong are relocated into a free cell, which puts their
//! IoU with every ground-truth box at zero.

mod generate;
mod verify;

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use generate::generate;
pub use verify::{verify, ConfusionEntry, ConfusionMatrix, Mismatch};

use crate::diagnosis::ErrorType;
use crate::error::{HoiError, Result};
use crate::ingest::{
    dataset_from_file, predictions_from_file, sha256_hex, Dataset, GtLoadOptions, PredictionSet,
};
use crate::matching::GtTripletRef;
use crate::schema::{GtFile, PredictionFile, FORMAT_VERSION};

pub const MAX_PAIRS_PER_IMAGE: usize = 12;

pub const GT_FILE: &str = "gt.json";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const LABELS_FILE: &str = "intended_labels.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionCounts {
    pub human_box: usize,
    pub object_box: usize,
    pub both_boxes: usize,
    pub association: usize,
    pub duplicate: usize,
    pub action: usize,
    pub missed_gt: usize,
    pub clean_tp: usize,
}

impl InjectionCounts {
    pub fn get(&self, t: ErrorType) -> usize {
        match t {
            ErrorType::HumanBox => self.human_box,
            ErrorType::ObjectBox => self.object_box,
            ErrorType::BothBoxes => self.both_boxes,
            ErrorType::Association => self.association,
            ErrorType::Duplicate => self.duplicate,
            ErrorType::Action => self.action,
            ErrorType::MissedGt => self.missed_gt,
        }
    }

    pub fn set(&mut self, t: ErrorType, n: usize) {
        let slot = match t {
            ErrorType::HumanBox => &mut self.human_box,
            ErrorType::ObjectBox => &mut self.object_box,
            ErrorType::BothBoxes => &mut self.both_boxes,
            ErrorType::Association => &mut self.association,
            ErrorType::Duplicate => &mut self.duplicate,
            ErrorType::Action => &mut self.action,
            ErrorType::MissedGt => &mut self.missed_gt,
        };
        *slot = n;
    }

    pub fn errors(&self) -> usize {
        ErrorType::ALL.iter().map(|t| self.get(*t)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    /// Largest shift of a correct box's edge, as a fraction of the box size.
    pub tp_shift: f64,
    /// Share of human/object box errors produced by a wrong label instead of
    /// a relocated box.
    pub label_swap_rate: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            tp_shift: 0.03,
            label_swap_rate: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub images: usize,
    /// Inclusive range.
    pub pairs_per_image: [usize; 2],
    pub max_actions_per_pair: usize,
    /// Object categories besides person.
    pub num_objects: usize,
    /// Actions besides the excluded no_interaction.
    pub num_actions: usize,
    pub counts: InjectionCounts,
    pub jitter: Jitter,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            images: 100,
            pairs_per_image: [1, 6],
            max_actions_per_pair: 3,
            num_objects: 10,
            num_actions: 8,
            counts: InjectionCounts::default(),
            jitter: Jitter::default(),
        }
    }
}

impl ScenarioSpec {
    /// `n` errors of one type on top of `clean_tp` correct detections.
    pub fn single_error(seed: u64, error: ErrorType, n: usize, clean_tp: usize) -> Self {
        let mut counts = InjectionCounts {
            clean_tp,
            ..Default::default()
        };
        counts.set(error, n);
        let images = (clean_tp + n).div_ceil(8).max(n.div_ceil(3)).max(1);
        Self {
            seed,
            images,
            counts,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.counts;
        let infeasible = |m: String| Err(HoiError::InfeasibleScenario(m));
        let [lo, hi] = self.pairs_per_image;
        if lo == 0 || lo > hi || hi > MAX_PAIRS_PER_IMAGE {
            return infeasible(format!(
                "pairs_per_image must satisfy 1 <= min <= max <= {MAX_PAIRS_PER_IMAGE}, got [{lo}, {hi}]"
            ));
        }
        if self.max_actions_per_pair == 0 || self.num_objects == 0 || self.num_actions == 0 {
            return infeasible(
                "max_actions_per_pair, num_objects and num_actions must be positive".into(),
            );
        }
        if !(0.0..=0.1).contains(&self.jitter.tp_shift) {
            return infeasible(format!(
                "jitter.tp_shift {} outside [0, 0.1]",
                self.jitter.tp_shift
            ));
        }
        if !(0.0..=1.0).contains(&self.jitter.label_swap_rate) {
            return infeasible(format!(
                "jitter.label_swap_rate {} outside [0, 1]",
                self.jitter.label_swap_rate
            ));
        }
        if c.duplicate > c.clean_tp {
            return infeasible(format!(
                "{} duplicates requested but only {} clean TPs to duplicate",
                c.duplicate, c.clean_tp
            ));
        }
        if c.association > 0 && hi < 2 {
            return infeasible("association errors need images with at least two pairs".into());
        }
        let gt = c.clean_tp + c.missed_gt + c.human_box + c.object_box + c.association + c.action;
        if c.association > 0 && gt < 2 {
            return infeasible(
                "association errors need a second ground-truth pair to borrow a human from".into(),
            );
        }
        if c.action > 0 && self.num_actions < 2 {
            return infeasible("action errors need at least two actions".into());
        }
        if c.both_boxes > 0 && gt == 0 {
            return infeasible(
                "both-box errors need some ground truth to land in an evaluated category".into(),
            );
        }
        if gt > 0 && self.images == 0 {
            return infeasible("no images to place ground truth in".into());
        }
        Ok(())
    }
}

/// Sidecar with the generator's intent, aligned with the prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntendedLabels {
    pub format_version: u32,
    pub seed: u64,
    /// Per prediction in file order: `tp` or an error type name.
    pub predictions: Vec<String>,
    pub missed_gt: Vec<MissedJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissedJson {
    pub image_id: String,
    pub pair: u32,
    pub action: u32,
}

/// A generated (or reloaded) scenario: loadable files plus what was injected.
#[derive(Debug, Clone)]
pub struct ScenarioTruth {
    pub dataset: Dataset,
    pub predictions: PredictionSet,
    /// Indexed by the prediction's position in the file; `None` for a TP.
    pub labels: Vec<Option<ErrorType>>,
    pub missed: BTreeSet<GtTripletRef>,
    files: [(&'static str, Vec<u8>); 3],
}

impl ScenarioTruth {
    fn from_parts(gt: &GtFile, preds: &PredictionFile, labels: &IntendedLabels) -> Result<Self> {
        let files = [
            (GT_FILE, to_bytes(gt)),
            (PREDICTIONS_FILE, to_bytes(preds)),
            (LABELS_FILE, to_bytes(labels)),
        ];
        Self::from_bytes(files)
    }

    fn from_bytes(files: [(&'static str, Vec<u8>); 3]) -> Result<Self> {
        let gt: GtFile = parse("ground-truth file", &files[0])?;
        let pf: PredictionFile = parse("prediction file", &files[1])?;
        let labels: IntendedLabels = parse("intended labels", &files[2])?;

        let dataset = dataset_from_file(gt, GtLoadOptions::default())?;
        if labels.predictions.len() != pf.predictions.len() {
            return Err(HoiError::validation(format!(
                "{} intended labels for {} predictions",
                labels.predictions.len(),
                pf.predictions.len()
            )));
        }
        let mut predictions = predictions_from_file(pf, &dataset, None)?;
        predictions.set_fingerprint(sha256_hex(&files[1].1));
        if predictions.len() != labels.predictions.len() {
            return Err(HoiError::validation(
                "scenario predictions were dropped on load; intended labels no longer align",
            ));
        }
        let parsed = labels
            .predictions
            .iter()
            .map(|l| match l.as_str() {
                "tp" => Ok(None),
                other => other.parse().map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut missed = BTreeSet::new();
        for m in &labels.missed_gt {
            let img = dataset.image_index(&m.image_id).ok_or_else(|| {
                HoiError::validation(format!("missed triplet on unknown image {}", m.image_id))
            })?;
            let pair = dataset
                .image(img)
                .pairs
                .get(m.pair as usize)
                .ok_or_else(|| {
                    HoiError::validation(format!(
                        "missed triplet on unknown pair {}#{}",
                        m.image_id, m.pair
                    ))
                })?;
            missed.insert(GtTripletRef {
                image: img as u32,
                pair: m.pair,
                object: pair.object_category(),
                action: crate::bbox::ActionId(m.action),
            });
        }
        Ok(Self {
            dataset,
            predictions,
            labels: parsed,
            missed,
            files,
        })
    }

    /// Serialized scenario files as `(file name, bytes)`.
    pub fn files(&self) -> &[(&'static str, Vec<u8>); 3] {
        &self.files
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| HoiError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| HoiError::Io { path, source })?;
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &'static str| -> Result<(&'static str, Vec<u8>)> {
            let path = dir.join(name);
            std::fs::read(&path)
                .map(|b| (name, b))
                .map_err(|source| HoiError::Io { path, source })
        };
        Self::from_bytes([read(GT_FILE)?, read(PREDICTIONS_FILE)?, read(LABELS_FILE)?])
    }

    pub fn intended_count(&self, t: ErrorType) -> usize {
        if t == ErrorType::MissedGt {
            self.missed.len()
        } else {
            self.labels.iter().filter(|l| **l == Some(t)).count()
        }
    }
}

fn parse<T: DeserializeOwned>(
    what: &'static str,
    (name, bytes): &(&'static str, Vec<u8>),
) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|source| HoiError::Parse {
        what,
        path: (*name).into(),
        source,
    })
}

fn to_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("scenario files serialize")
}

fn labels_file(seed: u64, labels: &[Option<ErrorType>], missed: Vec<MissedJson>) -> IntendedLabels {
    IntendedLabels {
        format_version: FORMAT_VERSION,
        seed,
        predictions: labels
            .iter()
            .map(|l| l.map_or("tp", ErrorType::name).to_string())
            .collect(),
        missed_gt: missed,
    }
}

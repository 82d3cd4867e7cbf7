//! End-to-end evaluation: load, match, score, diagnose, and write artifacts.

mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::diagnosis::{
    classify_errors, delta_map, DeltaMapReport, DiagnosedLedger, ErrorType, MapSummary,
    OracleRegistry,
};
use crate::error::{HoiError, Result};
use crate::ingest::{
    load_ground_truth, load_predictions, Dataset, DropCounts, GtLoadOptions, PredictionSet,
};
use crate::matching::{match_triplets, MatchLedger, DEFAULT_IOU_THRESHOLD};
use crate::metrics::{
    action_map, category_aps, mean_of, negative_pair_ap, pair_metrics, rare_split, PairMetrics,
    RareSplit, DEFAULT_RARE_THRESHOLD,
};
use crate::nms::{nms_pairs, DEFAULT_PAIR_NMS_THRESHOLD};
use crate::pairs::{match_pairs, PairLedger};
use crate::vocab::HoiCategory;

pub use render::{render, write_artifacts, Artifact};

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";

const ROLE_NOTE: &str = "V-COCO role annotations, if present, are flattened into one triplet \
    per (pair, action); the role scenarios of the original benchmark are not distinguished";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Plot,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Csv, Format::Plot];
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Plot => "plot",
        })
    }
}

impl FromStr for Format {
    type Err = HoiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "plot" => Ok(Format::Plot),
            other => Err(HoiError::validation(format!(
                "unknown output format `{other}` (json, csv, plot)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gt: PathBuf,
    pub predictions: PathBuf,
    pub out: PathBuf,
    pub iou_threshold: f64,
    /// Drop predictions whose human or object score is below this.
    pub score_threshold: Option<f64>,
    pub nms: bool,
    pub nms_threshold: f64,
    pub rare_threshold: usize,
    /// Restricts mAP, ΔmAP and PR-curve output to these categories.
    pub categories: Option<BTreeSet<HoiCategory>>,
    pub formats: BTreeSet<Format>,
    /// Oracle names; all built-in ones when `None`.
    pub oracles: Option<Vec<String>>,
}

impl RunConfig {
    pub fn new(
        gt: impl Into<PathBuf>,
        predictions: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
    ) -> Self {
        Self {
            gt: gt.into(),
            predictions: predictions.into(),
            out: out.into(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            score_threshold: None,
            nms: false,
            nms_threshold: DEFAULT_PAIR_NMS_THRESHOLD,
            rare_threshold: DEFAULT_RARE_THRESHOLD,
            categories: None,
            formats: Format::ALL.into_iter().collect(),
            oracles: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(HoiError::validation(format!(
                "IoU threshold {} outside (0, 1)",
                self.iou_threshold
            )));
        }
        if let Some(t) = self.score_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(HoiError::validation(format!(
                    "score threshold {t} outside [0, 1]"
                )));
            }
        }
        if !(self.nms_threshold > 0.0 && self.nms_threshold <= 1.0) {
            return Err(HoiError::validation(format!(
                "NMS threshold {} outside (0, 1]",
                self.nms_threshold
            )));
        }
        if self.rare_threshold == 0 {
            return Err(HoiError::validation("rare threshold must be at least 1"));
        }
        if self.formats.is_empty() {
            return Err(HoiError::validation("no output format requested"));
        }
        if self.categories.as_ref().is_some_and(BTreeSet::is_empty) {
            return Err(HoiError::validation("empty category subset"));
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<OracleRegistry> {
        match &self.oracles {
            None => Ok(OracleRegistry::builtin()),
            Some(names) => OracleRegistry::builtin().select(names),
        }
    }
}

/// Parses a comma-separated list such as `1:2, 4:0`.
pub fn parse_categories(s: &str) -> Result<BTreeSet<HoiCategory>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn parse_formats(s: &str) -> Result<BTreeSet<Format>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Every intermediate of one pipeline run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub dataset: Dataset,
    pub predictions: PredictionSet,
    pub pairs: PairLedger,
    pub diagnosed: DiagnosedLedger,
    pub split: RareSplit,
}

impl Analysis {
    /// Runs matching and diagnosis on already loaded inputs; applies pair
    /// NMS first when the config asks for it.
    pub fn run(dataset: Dataset, predictions: PredictionSet, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        if let Some(cats) = &config.categories {
            if let Some(c) = cats
                .iter()
                .find(|c| !dataset.vocabulary().is_evaluated(**c))
            {
                return Err(HoiError::validation(format!(
                    "category {c} is not an evaluated category"
                )));
            }
        }
        let predictions = if config.nms {
            nms_pairs(&predictions, config.nms_threshold)
        } else {
            predictions
        };
        let ledger: MatchLedger = match_triplets(&dataset, &predictions, config.iou_threshold);
        let diagnosed = classify_errors(&ledger, &dataset, &predictions, config.iou_threshold);
        let pairs = match_pairs(&dataset, &predictions, config.iou_threshold);
        let split = rare_split(&dataset, config.rare_threshold);
        Ok(Self {
            dataset,
            predictions,
            pairs,
            diagnosed,
            split,
        })
    }

    pub fn load(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let dataset = load_ground_truth(&config.gt, GtLoadOptions::default())?;
        let predictions = load_predictions(&config.predictions, &dataset, config.score_threshold)?;
        Self::run(dataset, predictions, config)
    }

    pub fn report(&self, config: &RunConfig) -> Result<DiagnosisReport> {
        let subset = config.categories.as_ref();
        let registry = config.registry()?;
        let ledger = &self.diagnosed.ledger;
        let aps = category_aps(ledger);
        let restrict = |s: &BTreeSet<HoiCategory>| -> BTreeSet<HoiCategory> {
            match subset {
                Some(sub) => s.intersection(sub).copied().collect(),
                None => s.clone(),
            }
        };
        let map = mean_of(&aps, subset).map_err(|e| HoiError::Computation {
            stage: "metrics",
            message: e.to_string(),
        })?;
        let deltas = delta_map(&self.diagnosed, &registry, &self.split, subset)?;
        let pair = pair_metrics(&self.pairs).map_err(|e| HoiError::Computation {
            stage: "pair metrics",
            message: e.to_string(),
        })?;
        let actions = action_map(&self.pairs, &self.dataset);

        let vocab = self.dataset.vocabulary();
        let per_category = aps
            .iter()
            .filter(|(c, _)| subset.is_none_or(|s| s.contains(c)))
            .map(|(c, ap)| {
                let l = &ledger.categories[c];
                CategoryRow {
                    category: c.to_string(),
                    name: vocab.category_name(*c),
                    rare: self.split.rare.contains(c),
                    n_gt: l.n_gt,
                    n_tp: l.n_tp(),
                    n_fp: l.n_fp(),
                    ap: ap.map(pct),
                }
            })
            .collect();
        let undefined_categories = aps
            .iter()
            .filter(|(c, ap)| ap.is_none() && subset.is_none_or(|s| s.contains(c)))
            .map(|(c, _)| c.to_string())
            .collect();

        Ok(DiagnosisReport {
            tool: Tool {
                name: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
            },
            config: ConfigEcho::from(config),
            inputs: Inputs {
                dataset_fingerprint: self.dataset.fingerprint().to_string(),
                predictions_fingerprint: self.predictions.fingerprint().to_string(),
                images: self.dataset.images().len(),
                gt_pairs: self.dataset.num_gt_pairs(),
                gt_triplets: self.dataset.num_gt_triplets(),
                predictions: self.predictions.len(),
                dropped: self.predictions.dropped(),
                unevaluated_predictions: ledger.unevaluated,
            },
            notes: vec![ROLE_NOTE],
            metrics: Metrics {
                map: pct(map),
                map_rare: mean_of(&aps, Some(&restrict(&self.split.rare)))
                    .ok()
                    .map(pct),
                map_non_rare: mean_of(&aps, Some(&restrict(&self.split.non_rare)))
                    .ok()
                    .map(pct),
                rare_threshold: self.split.threshold,
                undefined_categories,
                pairs: PairSection {
                    recall: pct(pair.recall),
                    precision: pct(pair.precision),
                    precision_defined: pair.precision_defined,
                    mean_pairs_per_image: pair.mean_pairs_per_image,
                    macro_recall: pct(pair.macro_recall),
                },
                negative_pair_ap: negative_pair_ap(&self.pairs).map(pct),
                action_map: actions.map.map(pct),
                action_ap: actions
                    .per_action
                    .iter()
                    .map(|(a, ap)| (vocab.action_names()[a.0 as usize].clone(), ap.map(pct)))
                    .collect(),
                per_category,
            },
            errors: self
                .diagnosed
                .histogram()
                .into_iter()
                .map(|(e, n)| (e.name(), n))
                .collect(),
            delta_map: DeltaSection::from(&deltas),
        })
    }

    pub fn pair_metrics(&self) -> Result<PairMetrics> {
        pair_metrics(&self.pairs)
    }
}

fn pct(x: f64) -> f64 {
    x * 100.0
}

/// Loads, evaluates and writes the requested artifacts into `config.out`.
/// Nothing is left behind when a write fails.
pub fn run_evaluate(config: &RunConfig) -> Result<DiagnosisReport> {
    let analysis = Analysis::load(config)?;
    let report = analysis.report(config)?;
    let files = render(&report, &analysis, config)?;
    write_artifacts(&config.out, &files)?;
    Ok(report)
}

/// All numbers are percentages except counts and `mean_pairs_per_image`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisReport {
    pub tool: Tool,
    pub config: ConfigEcho,
    pub inputs: Inputs,
    pub notes: Vec<&'static str>,
    pub metrics: Metrics,
    /// Error type → count, in figure order; absent types did not occur.
    pub errors: BTreeMap<&'static str, usize>,
    pub delta_map: DeltaSection,
}

impl DiagnosisReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut v = serde_json::to_vec_pretty(self).expect("report serializes");
        v.push(b'\n');
        v
    }

    /// Histogram in figure order.
    pub fn error_counts(&self) -> Vec<(ErrorType, usize)> {
        ErrorType::ALL
            .into_iter()
            .map(|e| (e, self.errors.get(e.name()).copied().unwrap_or(0)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub gt: String,
    pub predictions: String,
    pub iou_threshold: f64,
    pub score_threshold: Option<f64>,
    pub nms: bool,
    pub nms_threshold: Option<f64>,
    pub rare_threshold: usize,
    pub categories: Option<Vec<String>>,
    pub formats: Vec<Format>,
    pub oracles: Option<Vec<String>>,
}

impl From<&RunConfig> for ConfigEcho {
    fn from(c: &RunConfig) -> Self {
        Self {
            gt: c.gt.display().to_string(),
            predictions: c.predictions.display().to_string(),
            iou_threshold: c.iou_threshold,
            score_threshold: c.score_threshold,
            nms: c.nms,
            nms_threshold: c.nms.then_some(c.nms_threshold),
            rare_threshold: c.rare_threshold,
            categories: c
                .categories
                .as_ref()
                .map(|s| s.iter().map(ToString::to_string).collect()),
            formats: c.formats.iter().copied().collect(),
            oracles: c.oracles.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inputs {
    pub dataset_fingerprint: String,
    pub predictions_fingerprint: String,
    pub images: usize,
    pub gt_pairs: usize,
    pub gt_triplets: usize,
    /// Kept after filtering and NMS.
    pub predictions: usize,
    pub dropped: DropCounts,
    pub unevaluated_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub map: f64,
    pub map_rare: Option<f64>,
    pub map_non_rare: Option<f64>,
    pub rare_threshold: usize,
    /// Categories without ground truth, left out of every mean.
    pub undefined_categories: Vec<String>,
    pub pairs: PairSection,
    pub negative_pair_ap: Option<f64>,
    pub action_map: Option<f64>,
    pub action_ap: BTreeMap<String, Option<f64>>,
    pub per_category: Vec<CategoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSection {
    pub recall: f64,
    pub precision: f64,
    pub precision_defined: bool,
    pub mean_pairs_per_image: f64,
    /// Per-image recall, averaged; a secondary reading of "average recall".
    pub macro_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: String,
    pub name: String,
    pub rare: bool,
    pub n_gt: usize,
    pub n_tp: usize,
    pub n_fp: usize,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSection {
    pub baseline: MapSummary,
    pub oracles: Vec<DeltaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub error_type: String,
    pub map: MapSummary,
    pub delta: MapSummary,
}

fn pct_summary(s: &MapSummary) -> MapSummary {
    MapSummary {
        overall: s.overall.map(pct),
        rare: s.rare.map(pct),
        non_rare: s.non_rare.map(pct),
    }
}

impl From<&DeltaMapReport> for DeltaSection {
    fn from(r: &DeltaMapReport) -> Self {
        Self {
            baseline: pct_summary(&r.baseline),
            oracles: r
                .oracles
                .iter()
                .map(|o| DeltaRow {
                    error_type: o.oracle.clone(),
                    map: pct_summary(&o.map),
                    delta: pct_summary(&o.delta),
                })
                .collect(),
        }
    }
}

//! Error diagnosis for human-object interaction (HOI) detectors.
//!
//! Evaluates detections against ground truth with triplet mAP, attributes
//! every failure to one of seven error types, and measures how much mAP each
//! oracle fix would recover. Pair localization and interaction
//! classification are scored separately.

pub mod bbox;
pub mod diagnosis;
pub mod error;
pub mod ingest;
pub mod matching;
pub mod metrics;
pub mod nms;
pub mod pairs;
pub mod report;
pub mod schema;
pub mod synth;
pub mod types;
pub mod vocab;

pub use bbox::{iou, ActionId, BoundingBox, ObjectId};
pub use diagnosis::{
    classify_errors, delta_map, DeltaMapReport, DiagnosedLedger, ErrorType, Oracle, OracleRegistry,
};
pub use error::{HoiError, Result};
pub use ingest::{load_ground_truth, load_predictions, Dataset, GtLoadOptions, PredictionSet};
pub use matching::{match_triplets, MatchLedger, DEFAULT_IOU_THRESHOLD};
pub use pairs::match_pairs;
pub use types::{triplet_confidence, GtPair, PredictedTriplet};
pub use vocab::{HoiCategory, Vocabulary};

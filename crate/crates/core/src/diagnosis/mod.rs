//! Error attribution: seven error types, oracle fixes and ΔmAP.

mod classify;
mod delta;
mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use classify::classify_errors;
pub use delta::{delta_map, DeltaMapReport, MapSummary, OracleDelta};
pub use oracle::{apply_oracle, apply_oracles, Oracle, OracleRegistry};

use crate::error::HoiError;
use crate::matching::{GtTripletRef, MatchLedger};
use crate::vocab::HoiCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    #[serde(rename = "human")]
    HumanBox,
    #[serde(rename = "object")]
    ObjectBox,
    #[serde(rename = "both")]
    BothBoxes,
    Association,
    Duplicate,
    Action,
    MissedGt,
}

impl ErrorType {
    /// Figure order.
    pub const ALL: [ErrorType; 7] = [
        ErrorType::HumanBox,
        ErrorType::ObjectBox,
        ErrorType::BothBoxes,
        ErrorType::Association,
        ErrorType::Duplicate,
        ErrorType::Action,
        ErrorType::MissedGt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::HumanBox => "human",
            ErrorType::ObjectBox => "object",
            ErrorType::BothBoxes => "both",
            ErrorType::Association => "association",
            ErrorType::Duplicate => "duplicate",
            ErrorType::Action => "action",
            ErrorType::MissedGt => "missed_gt",
        }
    }

    /// Types whose oracle turns the prediction into a TP.
    pub fn is_fixable(self) -> bool {
        matches!(
            self,
            ErrorType::HumanBox | ErrorType::ObjectBox | ErrorType::Association | ErrorType::Action
        )
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = HoiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| HoiError::validation(format!("unknown error type `{s}`")))
    }
}

/// A match ledger whose FPs carry an error type, plus the ground-truth
/// triplets nothing would cover even after every fix-to-TP oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosedLedger {
    pub ledger: MatchLedger,
    pub missed: BTreeMap<HoiCategory, Vec<GtTripletRef>>,
}

impl DiagnosedLedger {
    pub fn num_missed(&self) -> usize {
        self.missed.values().map(Vec::len).sum()
    }

    /// Count per error type; types that never occur are absent.
    pub fn histogram(&self) -> BTreeMap<ErrorType, usize> {
        let mut h = BTreeMap::new();
        for (_, r) in self.ledger.records() {
            if let Some(e) = r.error {
                *h.entry(e).or_insert(0) += 1;
            }
        }
        let missed = self.num_missed();
        if missed > 0 {
            h.insert(ErrorType::MissedGt, missed);
        }
        h
    }
}

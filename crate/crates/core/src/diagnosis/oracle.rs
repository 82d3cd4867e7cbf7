//! The nine oracles, each a read-only transform of a diagnosed ledger.

use std::collections::{BTreeSet, HashSet};

use crate::error::{HoiError, Result};
use crate::matching::{MatchLedger, Verdict};
use crate::vocab::HoiCategory;

use super::{DiagnosedLedger, ErrorType};

/// A hypothetical perfect fix for one kind of failure.
pub trait Oracle: Send + Sync {
    fn name(&self) -> &'static str;

    /// Returns the fixed ledger; `diagnosed` is left untouched.
    fn apply(&self, diagnosed: &DiagnosedLedger) -> DiagnosedLedger;
}

/// Converts every FP of one type into a TP on its fix target, keeping its
/// confidence. When that creates two TPs on one triplet the lower-ranked one
/// is dropped.
struct FixToTp(ErrorType);

/// Drops every FP of one type.
struct RemoveType(ErrorType);

/// Lowers N_GT by the ground-truth triplets nothing would ever cover.
struct Missing;

/// Drops every FP.
struct AllFalsePositives;

/// Sets N_GT to the number of TPs.
struct AllFalseNegatives;

impl Oracle for FixToTp {
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn apply(&self, diagnosed: &DiagnosedLedger) -> DiagnosedLedger {
        let mut out = diagnosed.clone();
        let mut touched: BTreeSet<HoiCategory> = BTreeSet::new();
        let mut moved = Vec::new();
        for (cat, l) in out.ledger.categories.iter_mut() {
            let before = l.records.len();
            l.records.retain_mut(|r| {
                if r.error != Some(self.0) {
                    return true;
                }
                let target = r.fix_target.expect("fixable errors carry a target");
                r.verdict = Verdict::Tp;
                r.matched = Some(target);
                r.error = None;
                r.fix_target = None;
                moved.push(r.clone());
                false
            });
            if l.records.len() != before {
                touched.insert(*cat);
            }
        }
        for r in moved {
            let cat = r.matched.unwrap().category();
            touched.insert(cat);
            out.ledger
                .categories
                .entry(cat)
                .or_default()
                .records
                .push(r);
        }
        for cat in touched {
            let l = out.ledger.categories.get_mut(&cat).unwrap();
            l.sort();
            let mut seen = HashSet::new();
            l.records
                .retain(|r| r.matched.is_none_or(|m| seen.insert(m)));
        }
        out
    }
}

impl Oracle for RemoveType {
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn apply(&self, diagnosed: &DiagnosedLedger) -> DiagnosedLedger {
        let mut out = diagnosed.clone();
        for l in out.ledger.categories.values_mut() {
            l.records.retain(|r| r.error != Some(self.0));
        }
        out
    }
}

impl Oracle for Missing {
    fn name(&self) -> &'static str {
        ErrorType::MissedGt.name()
    }

    fn apply(&self, diagnosed: &DiagnosedLedger) -> DiagnosedLedger {
        let mut out = diagnosed.clone();
        for (cat, missed) in std::mem::take(&mut out.missed) {
            if let Some(l) = out.ledger.categories.get_mut(&cat) {
                l.n_gt -= missed.len();
            }
        }
        out
    }
}

impl Oracle for AllFalsePositives {
    fn name(&self) -> &'static str {
        "fp"
    }

    fn apply(&self, diagnosed: &DiagnosedLedger) -> DiagnosedLedger {
        let mut out = diagnosed.clone();
        for l in out.ledger.categories.values_mut() {
            l.records.retain(|r| r.is_tp());
        }
        out
    }
}

impl Oracle for AllFalseNegatives {
    fn name(&self) -> &'static str {
        "fn"
    }

    fn apply(&self, diagnosed: &DiagnosedLedger) -> DiagnosedLedger {
        let mut out = diagnosed.clone();
        for l in out.ledger.categories.values_mut() {
            l.n_gt = l.n_tp();
        }
        out.missed.clear();
        out
    }
}

/// Oracles looked up by name, kept in registration order.
pub struct OracleRegistry {
    oracles: Vec<Box<dyn Oracle>>,
}

impl OracleRegistry {
    pub fn empty() -> Self {
        Self {
            oracles: Vec::new(),
        }
    }

    /// The nine built-in oracles in figure order:
    /// human, object, both, association, duplicate, action, missed_gt, fp, fn.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(FixToTp(ErrorType::HumanBox)));
        r.register(Box::new(FixToTp(ErrorType::ObjectBox)));
        r.register(Box::new(RemoveType(ErrorType::BothBoxes)));
        r.register(Box::new(FixToTp(ErrorType::Association)));
        r.register(Box::new(RemoveType(ErrorType::Duplicate)));
        r.register(Box::new(FixToTp(ErrorType::Action)));
        r.register(Box::new(Missing));
        r.register(Box::new(AllFalsePositives));
        r.register(Box::new(AllFalseNegatives));
        r
    }

    /// Adds an oracle, replacing any registered under the same name in place.
    pub fn register(&mut self, oracle: Box<dyn Oracle>) {
        match self.oracles.iter().position(|o| o.name() == oracle.name()) {
            Some(i) => self.oracles[i] = oracle,
            None => self.oracles.push(oracle),
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn Oracle> {
        self.oracles
            .iter()
            .find(|o| o.name() == name)
            .map(|o| o.as_ref())
            .ok_or_else(|| HoiError::UnknownOracle(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.oracles.iter().map(|o| o.name()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Oracle> {
        self.oracles.iter().map(|o| o.as_ref())
    }

    /// Only the named oracles, in registry order.
    pub fn select(mut self, names: &[impl AsRef<str>]) -> Result<Self> {
        for n in names {
            self.get(n.as_ref())?;
        }
        self.oracles
            .retain(|o| names.iter().any(|n| n.as_ref() == o.name()));
        Ok(self)
    }
}

impl Default for OracleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

pub fn apply_oracle(diagnosed: &DiagnosedLedger, name: &str) -> Result<MatchLedger> {
    Ok(OracleRegistry::builtin().get(name)?.apply(diagnosed).ledger)
}

/// Applies several built-in oracles one after another.
pub fn apply_oracles(diagnosed: &DiagnosedLedger, names: &[&str]) -> Result<MatchLedger> {
    let registry = OracleRegistry::builtin();
    let mut d = diagnosed.clone();
    for n in names {
        d = registry.get(n)?.apply(&d);
    }
    Ok(d.ledger)
}

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bbox::{ActionId, ObjectId};
use crate::error::{HoiError, Result};

/// An (object, action) combination; the unit AP is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HoiCategory {
    pub object: ObjectId,
    pub action: ActionId,
}

impl HoiCategory {
    pub fn new(object: u32, action: u32) -> Self {
        Self {
            object: ObjectId(object),
            action: ActionId(action),
        }
    }
}

impl fmt::Display for HoiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.object, self.action)
    }
}

/// Parses `object:action`, e.g. `4:12`.
impl FromStr for HoiCategory {
    type Err = HoiError;

    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || HoiError::validation(format!("category `{s}` is not of the form OBJECT:ACTION"));
        let (o, a) = s.trim().split_once(':').ok_or_else(bad)?;
        let object = o.trim().parse().map_err(|_| bad())?;
        let action = a.trim().parse().map_err(|_| bad())?;
        Ok(HoiCategory::new(object, action))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    object_names: Vec<String>,
    action_names: Vec<String>,
    valid_hoi: BTreeSet<HoiCategory>,
    excluded_actions: BTreeSet<ActionId>,
    person: ObjectId,
}

impl Vocabulary {
    pub fn new(
        object_names: Vec<String>,
        action_names: Vec<String>,
        valid_hoi: impl IntoIterator<Item = HoiCategory>,
        excluded_actions: impl IntoIterator<Item = ActionId>,
        person: Option<ObjectId>,
    ) -> Result<Self> {
        let valid_hoi: BTreeSet<_> = valid_hoi.into_iter().collect();
        let excluded_actions: BTreeSet<_> = excluded_actions.into_iter().collect();
        let n_obj = object_names.len() as u32;
        let n_act = action_names.len() as u32;

        let bad: Vec<String> = valid_hoi
            .iter()
            .filter(|c| c.object.0 >= n_obj || c.action.0 >= n_act)
            .map(ToString::to_string)
            .collect();
        if !bad.is_empty() {
            return Err(HoiError::validation(format!(
                "valid_hoi entries outside the vocabulary: {}",
                bad.join(", ")
            )));
        }
        if let Some(a) = excluded_actions.iter().find(|a| a.0 >= n_act) {
            return Err(HoiError::validation(format!(
                "excluded action {a} outside the vocabulary ({n_act} actions)"
            )));
        }

        // Without an explicit id, fall back to an object named "person", else 0.
        let person = match person {
            Some(p) => p,
            None => ObjectId(object_names.iter().position(|n| n == "person").unwrap_or(0) as u32),
        };
        if person.0 >= n_obj {
            return Err(HoiError::validation(format!(
                "person category {person} outside the vocabulary ({n_obj} objects)"
            )));
        }

        Ok(Self {
            object_names,
            action_names,
            valid_hoi,
            excluded_actions,
            person,
        })
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn person(&self) -> ObjectId {
        self.person
    }

    pub fn num_objects(&self) -> usize {
        self.object_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    /// Every declared combination, including excluded ones.
    pub fn declared_hoi(&self) -> &BTreeSet<HoiCategory> {
        &self.valid_hoi
    }

    pub fn excluded_actions(&self) -> &BTreeSet<ActionId> {
        &self.excluded_actions
    }

    pub fn is_excluded(&self, action: ActionId) -> bool {
        self.excluded_actions.contains(&action)
    }

    pub fn has_object(&self, object: ObjectId) -> bool {
        (object.0 as usize) < self.object_names.len()
    }

    pub fn has_action(&self, action: ActionId) -> bool {
        (action.0 as usize) < self.action_names.len()
    }

    /// True when the combination is declared and its action not excluded.
    pub fn is_evaluated(&self, cat: HoiCategory) -> bool {
        !self.is_excluded(cat.action) && self.valid_hoi.contains(&cat)
    }

    /// The categories that survive exclusion filtering, in id order.
    pub fn evaluated_categories(&self) -> impl Iterator<Item = HoiCategory> + '_ {
        self.valid_hoi
            .iter()
            .copied()
            .filter(|c| !self.is_excluded(c.action))
    }

    pub fn category_name(&self, cat: HoiCategory) -> String {
        let o = self
            .object_names
            .get(cat.object.0 as usize)
            .map(String::as_str)
            .unwrap_or("?");
        let a = self
            .action_names
            .get(cat.action.0 as usize)
            .map(String::as_str)
            .unwrap_or("?");
        format!("{a} {o}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn category_parse() {
        assert_eq!(
            "3:7".parse::<HoiCategory>().unwrap(),
            HoiCategory::new(3, 7)
        );
        assert!("3-7".parse::<HoiCategory>().is_err());
        assert!("a:7".parse::<HoiCategory>().is_err());
    }

    #[test]
    fn exclusion_removes_categories() {
        let valid = (0..3).flat_map(|o| (0..4).map(move |a| HoiCategory::new(o, a)));
        let v = Vocabulary::new(names("o", 3), names("a", 4), valid, [ActionId(0)], None).unwrap();
        assert_eq!(v.declared_hoi().len(), 12);
        assert_eq!(v.evaluated_categories().count(), 9);
        assert!(!v.is_evaluated(HoiCategory::new(1, 0)));
        assert!(v.is_evaluated(HoiCategory::new(1, 1)));
    }

    #[test]
    fn person_lookup() {
        let objs = vec!["bicycle".to_string(), "person".to_string()];
        let v = Vocabulary::new(objs.clone(), names("a", 1), [], [], None).unwrap();
        assert_eq!(v.person(), ObjectId(1));
        let v = Vocabulary::new(objs, names("a", 1), [], [], Some(ObjectId(0))).unwrap();
        assert_eq!(v.person(), ObjectId(0));
    }

    #[test]
    fn out_of_range_rejected() {
        let r = Vocabulary::new(
            names("o", 2),
            names("a", 2),
            [HoiCategory::new(2, 0)],
            [],
            None,
        );
        assert!(matches!(r, Err(HoiError::Validation(_))));
        let r = Vocabulary::new(names("o", 2), names("a", 2), [], [ActionId(5)], None);
        assert!(r.is_err());
    }
}

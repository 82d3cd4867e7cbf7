//! Loading ground truth and predictions from the canonical JSON files.
//!
//! Excluded actions (HICO-DET's `no_interaction`) are stripped at load time:
//! ground-truth pairs lose those labels and are dropped if nothing remains,
//! predictions carrying them are discarded.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::bbox::{coords_cmp, ActionId, BoundingBox, ObjectId};
use crate::error::{HoiError, Result};
use crate::schema::{
    GtFile, GtPairJson, ImageJson, PredictionFile, PredictionJson, VocabularyJson, FORMAT_VERSION,
};
use crate::types::{GtPair, PredictedTriplet};
use crate::vocab::{HoiCategory, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtLoadOptions {
    /// Fold pairs with bit-identical boxes and object category into one
    /// multi-label pair (annotations often list one entry per action).
    pub merge_identical_pairs: bool,
}

impl Default for GtLoadOptions {
    fn default() -> Self {
        Self {
            merge_identical_pairs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub pairs: Vec<GtPair>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vocabulary: Vocabulary,
    images: Vec<ImageRecord>,
    index: HashMap<String, usize>,
    /// Position of each image when sorted by id; the tie-break key.
    rank: Vec<u32>,
    counts: BTreeMap<HoiCategory, usize>,
    fingerprint: String,
}

impl Dataset {
    pub fn new(vocabulary: Vocabulary, images: Vec<ImageRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if index.insert(img.id.clone(), i).is_some() {
                return Err(HoiError::validation(format!(
                    "duplicate image id `{}`",
                    img.id
                )));
            }
        }

        let mut offenders = Vec::new();
        let mut counts: BTreeMap<HoiCategory, usize> =
            vocabulary.evaluated_categories().map(|c| (c, 0)).collect();
        for img in &images {
            for (p, pair) in img.pairs.iter().enumerate() {
                if pair.actions.is_empty() {
                    offenders.push(format!("{}#{p}: empty action set", img.id));
                }
                for cat in pair.categories() {
                    match counts.get_mut(&cat) {
                        Some(n) => *n += 1,
                        None => offenders.push(format!("{}#{p}: category {cat}", img.id)),
                    }
                }
            }
        }
        if !offenders.is_empty() {
            return Err(unknown_categories(offenders));
        }

        let mut order: Vec<usize> = (0..images.len()).collect();
        order.sort_by(|&a, &b| images[a].id.cmp(&images[b].id));
        let mut rank = vec![0u32; images.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }

        let mut ds = Self {
            vocabulary,
            images,
            index,
            rank,
            counts,
            fingerprint: String::new(),
        };
        ds.fingerprint = sha256_hex(&serde_json::to_vec(&ds.to_file()).expect("serializable"));
        Ok(ds)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn image(&self, idx: usize) -> &ImageRecord {
        &self.images[idx]
    }

    pub fn image_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn image_rank(&self, idx: usize) -> u32 {
        self.rank[idx]
    }

    /// Ground-truth triplet count for every evaluated category (zeros included).
    pub fn counts(&self) -> &BTreeMap<HoiCategory, usize> {
        &self.counts
    }

    pub fn count(&self, cat: HoiCategory) -> usize {
        self.counts.get(&cat).copied().unwrap_or(0)
    }

    pub fn categories(&self) -> impl Iterator<Item = HoiCategory> + '_ {
        self.counts.keys().copied()
    }

    pub fn num_gt_pairs(&self) -> usize {
        self.images.iter().map(|i| i.pairs.len()).sum()
    }

    pub fn num_gt_triplets(&self) -> usize {
        self.counts.values().sum()
    }

    /// SHA-256 over the canonical serialization of the loaded content.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn to_file(&self) -> GtFile {
        let v = &self.vocabulary;
        GtFile {
            format_version: FORMAT_VERSION,
            vocabulary: VocabularyJson {
                objects: v.object_names().to_vec(),
                actions: v.action_names().to_vec(),
                valid_hoi: v
                    .declared_hoi()
                    .iter()
                    .map(|c| [c.object.0, c.action.0])
                    .collect(),
                excluded_actions: v.excluded_actions().iter().map(|a| a.0).collect(),
                person_category: Some(v.person().0),
            },
            images: self
                .images
                .iter()
                .map(|img| ImageJson {
                    id: img.id.clone(),
                    gt_pairs: img
                        .pairs
                        .iter()
                        .map(|p| GtPairJson {
                            human_box: p.human.coords(),
                            object_box: p.object.coords(),
                            object_category: p.object_category().0,
                            actions: p.actions.iter().map(|a| a.0).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

fn unknown_categories(mut offenders: Vec<String>) -> HoiError {
    let total = offenders.len();
    offenders.truncate(20);
    let more = if total > 20 {
        format!(" (and {} more)", total - 20)
    } else {
        String::new()
    };
    HoiError::validation(format!(
        "{total} ground-truth labels outside the valid HOI set: {}{more}",
        offenders.join("; ")
    ))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| HoiError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_ground_truth(path: impl AsRef<Path>, options: GtLoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file: GtFile = serde_json::from_slice(&read(path)?).map_err(|source| HoiError::Parse {
        what: "ground-truth file",
        path: path.to_path_buf(),
        source,
    })?;
    dataset_from_file(file, options)
}

pub fn dataset_from_file(file: GtFile, options: GtLoadOptions) -> Result<Dataset> {
    check_version(file.format_version)?;
    let vj = file.vocabulary;
    let vocabulary = Vocabulary::new(
        vj.objects,
        vj.actions,
        vj.valid_hoi.iter().map(|&[o, a]| HoiCategory::new(o, a)),
        vj.excluded_actions.iter().map(|&a| ActionId(a)),
        vj.person_category.map(ObjectId),
    )?;
    let person = vocabulary.person();

    let mut offenders = Vec::new();
    let mut images = Vec::with_capacity(file.images.len());
    for img in file.images {
        let mut pairs: Vec<GtPair> = Vec::with_capacity(img.gt_pairs.len());
        for (p, gp) in img.gt_pairs.into_iter().enumerate() {
            let object = ObjectId(gp.object_category);
            if !vocabulary.has_object(object) {
                offenders.push(format!("{}#{p}: object category {object}", img.id));
                continue;
            }
            let mut actions = BTreeSet::new();
            for a in gp.actions.into_iter().map(ActionId) {
                if !vocabulary.has_action(a) {
                    offenders.push(format!("{}#{p}: action {a}", img.id));
                } else if vocabulary.is_excluded(a) {
                    // dropped
                } else if !vocabulary.is_evaluated(HoiCategory { object, action: a }) {
                    offenders.push(format!("{}#{p}: category {object}:{a}", img.id));
                } else {
                    actions.insert(a);
                }
            }
            if actions.is_empty() {
                continue;
            }
            let human = BoundingBox::annotation(gp.human_box, person)
                .map_err(|e| HoiError::validation(format!("{}#{p} human box: {e}", img.id)))?;
            let object = BoundingBox::annotation(gp.object_box, object)
                .map_err(|e| HoiError::validation(format!("{}#{p} object box: {e}", img.id)))?;

            let existing = options.merge_identical_pairs.then(|| {
                pairs
                    .iter_mut()
                    .find(|q| q.human.same_region(&human) && q.object.same_region(&object))
            });
            match existing.flatten() {
                Some(q) => q.actions.extend(actions),
                None => pairs.push(GtPair::new(human, object, actions)?),
            }
        }
        images.push(ImageRecord { id: img.id, pairs });
    }
    if !offenders.is_empty() {
        return Err(unknown_categories(offenders));
    }
    Dataset::new(vocabulary, images)
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(HoiError::validation(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Predictions that were read but not kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct DropCounts {
    pub below_score_threshold: usize,
    pub excluded_action: usize,
    /// (object, action) combinations outside the evaluated set.
    pub invalid_category: usize,
}

/// Predictions aligned with the companion dataset's images, each image's list
/// in canonical (confidence-descending) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    per_image: Vec<Vec<PredictedTriplet>>,
    score_threshold: Option<f64>,
    dropped: DropCounts,
    fingerprint: String,
}

impl PredictionSet {
    pub fn new(mut per_image: Vec<Vec<PredictedTriplet>>, score_threshold: Option<f64>) -> Self {
        for preds in &mut per_image {
            preds.sort_by(|a, b| a.canonical_cmp(b).then(a.source_index.cmp(&b.source_index)));
        }
        Self {
            per_image,
            score_threshold,
            dropped: DropCounts::default(),
            fingerprint: String::new(),
        }
    }

    /// Same metadata, different (already filtered) predictions.
    pub(crate) fn with_images(&self, per_image: Vec<Vec<PredictedTriplet>>) -> Self {
        Self {
            per_image,
            score_threshold: self.score_threshold,
            dropped: self.dropped,
            fingerprint: self.fingerprint.clone(),
        }
    }

    pub fn image(&self, idx: usize) -> &[PredictedTriplet] {
        &self.per_image[idx]
    }

    pub fn per_image(&self) -> &[Vec<PredictedTriplet>] {
        &self.per_image
    }

    pub fn num_images(&self) -> usize {
        self.per_image.len()
    }

    pub fn len(&self) -> usize {
        self.per_image.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn score_threshold(&self) -> Option<f64> {
        self.score_threshold
    }

    pub fn dropped(&self) -> DropCounts {
        self.dropped
    }

    /// SHA-256 of the file bytes this set was loaded from; empty when built in memory.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub(crate) fn set_fingerprint(&mut self, fingerprint: String) {
        self.fingerprint = fingerprint;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &PredictedTriplet)> {
        self.per_image
            .iter()
            .enumerate()
            .flat_map(|(i, v)| v.iter().map(move |p| (i, p)))
    }

    /// Distinct (human box, object box) detections per image, averaged over all images.
    pub fn mean_pairs_per_image(&self) -> f64 {
        if self.per_image.is_empty() {
            return 0.0;
        }
        let total: usize = self.per_image.iter().map(|v| count_unique_pairs(v)).sum();
        total as f64 / self.per_image.len() as f64
    }

    pub fn to_file(&self, dataset: &Dataset) -> PredictionFile {
        let person = dataset.vocabulary().person();
        let mut rows: Vec<(usize, PredictionJson)> = self
            .iter()
            .map(|(i, p)| {
                let human_category = p.human.category();
                (
                    p.source_index,
                    PredictionJson {
                        image_id: dataset.image(i).id.clone(),
                        human_box: p.human.coords(),
                        human_score: p.human.score(),
                        human_category: (human_category != person).then_some(human_category.0),
                        object_box: p.object.coords(),
                        object_category: p.object.category().0,
                        object_score: p.object.score(),
                        action: p.action.0,
                        action_score: p.action_score,
                        confidence: p.confidence,
                    },
                )
            })
            .collect();
        rows.sort_by_key(|(idx, _)| *idx);
        PredictionFile {
            format_version: FORMAT_VERSION,
            score_threshold: self.score_threshold,
            predictions: rows.into_iter().map(|(_, r)| r).collect(),
        }
    }
}

/// Identity of a detected human-object pair within one image.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairKey<'a>(pub &'a PredictedTriplet);

impl PartialEq for PairKey<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.0.human.same_region(&other.0.human) && self.0.object.same_region(&other.0.object)
    }
}

impl Eq for PairKey<'_> {}

impl std::hash::Hash for PairKey<'_> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        for b in [&self.0.human, &self.0.object] {
            b.category().hash(state);
            for c in b.coords() {
                c.to_bits().hash(state);
            }
        }
    }
}

pub(crate) fn count_unique_pairs(preds: &[PredictedTriplet]) -> usize {
    preds.iter().map(PairKey).collect::<HashSet<_>>().len()
}

pub fn load_predictions(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    score_filter: Option<f64>,
) -> Result<PredictionSet> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let file: PredictionFile =
        serde_json::from_slice(&bytes).map_err(|source| HoiError::Parse {
            what: "prediction file",
            path: path.to_path_buf(),
            source,
        })?;
    let mut set = predictions_from_file(file, dataset, score_filter)?;
    set.fingerprint = sha256_hex(&bytes);
    Ok(set)
}

pub fn predictions_from_file(
    file: PredictionFile,
    dataset: &Dataset,
    score_filter: Option<f64>,
) -> Result<PredictionSet> {
    check_version(file.format_version)?;
    if let Some(t) = score_filter {
        if !(0.0..=1.0).contains(&t) {
            return Err(HoiError::validation(format!(
                "score threshold {t} outside [0, 1]"
            )));
        }
    }
    let vocab = dataset.vocabulary();
    let mut per_image = vec![Vec::new(); dataset.images().len()];
    let mut dropped = DropCounts::default();
    let mut unknown_images = BTreeSet::new();

    for (i, pj) in file.predictions.into_iter().enumerate() {
        let ctx = |msg: String| HoiError::validation(format!("prediction {i}: {msg}"));
        let Some(img) = dataset.image_index(&pj.image_id) else {
            unknown_images.insert(pj.image_id);
            continue;
        };
        for (name, s) in [
            ("human_score", pj.human_score),
            ("object_score", pj.object_score),
            ("action_score", pj.action_score),
        ]
        .into_iter()
        .chain(pj.confidence.map(|c| ("confidence", c)))
        {
            if !(0.0..=1.0).contains(&s) {
                return Err(ctx(format!("{name} {s} outside [0, 1]")));
            }
        }
        let human_cat = ObjectId(pj.human_category.unwrap_or(vocab.person().0));
        let object_cat = ObjectId(pj.object_category);
        let action = ActionId(pj.action);
        if !vocab.has_object(human_cat) || !vocab.has_object(object_cat) {
            return Err(ctx("object category outside the vocabulary".into()));
        }
        if !vocab.has_action(action) {
            return Err(ctx(format!("action {action} outside the vocabulary")));
        }
        let human = BoundingBox::new(pj.human_box, human_cat, pj.human_score)
            .map_err(|e| ctx(format!("human box: {e}")))?;
        let object = BoundingBox::new(pj.object_box, object_cat, pj.object_score)
            .map_err(|e| ctx(format!("object box: {e}")))?;

        if let Some(t) = score_filter {
            if human.score() < t || object.score() < t {
                dropped.below_score_threshold += 1;
                continue;
            }
        }
        if vocab.is_excluded(action) {
            dropped.excluded_action += 1;
            continue;
        }
        if !vocab.is_evaluated(HoiCategory {
            object: object_cat,
            action,
        }) {
            dropped.invalid_category += 1;
            continue;
        }
        per_image[img].push(PredictedTriplet {
            human,
            object,
            action,
            action_score: pj.action_score,
            confidence: pj.confidence,
            source_index: i,
        });
    }

    if !unknown_images.is_empty() {
        let list: Vec<_> = unknown_images.into_iter().take(20).collect();
        return Err(HoiError::validation(format!(
            "predictions reference images missing from the ground truth: {}",
            list.join(", ")
        )));
    }

    let threshold = match (score_filter, file.score_threshold) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    let mut set = PredictionSet::new(per_image, threshold);
    set.dropped = dropped;
    Ok(set)
}

/// Boxes compare by coordinates only; used to order pairs deterministically.
pub(crate) fn pair_cmp(a: &PredictedTriplet, b: &PredictedTriplet) -> std::cmp::Ordering {
    coords_cmp(&a.human.coords(), &b.human.coords())
        .then_with(|| coords_cmp(&a.object.coords(), &b.object.coords()))
        .then_with(|| a.object.category().cmp(&b.object.category()))
        .then_with(|| a.human.category().cmp(&b.human.category()))
}

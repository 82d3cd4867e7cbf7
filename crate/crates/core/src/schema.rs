//! On-disk JSON layout shared by ground truth, predictions and synthetic scenarios.

use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtFile {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub vocabulary: VocabularyJson,
    pub images: Vec<ImageJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyJson {
    pub objects: Vec<String>,
    pub actions: Vec<String>,
    pub valid_hoi: Vec<[u32; 2]>,
    #[serde(default)]
    pub excluded_actions: Vec<u32>,
    /// Object id used for humans; defaults to the object named "person".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_category: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageJson {
    pub id: String,
    #[serde(default)]
    pub gt_pairs: Vec<GtPairJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtPairJson {
    pub human_box: [f64; 4],
    pub object_box: [f64; 4],
    pub object_category: u32,
    pub actions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    #[serde(default = "format_version")]
    pub format_version: u32,
    /// Detection-score filter already applied upstream, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_threshold: Option<f64>,
    pub predictions: Vec<PredictionJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionJson {
    pub image_id: String,
    pub human_box: [f64; 4],
    pub human_score: f64,
    /// Label of the "human" box; absent means the vocabulary's person id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_category: Option<u32>,
    pub object_box: [f64; 4],
    pub object_category: u32,
    pub object_score: f64,
    pub action: u32,
    pub action_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

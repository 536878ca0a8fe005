//! Model-ready samples derived from a featurized corpus.

use serde::{Deserialize, Serialize};

use crate::corpus::GrowthTarget;

/// One discussion prepared for temporal prediction.
///
/// Only the leading run of valid windows is kept: step `i` observes the post
/// plus `windows[..i]` and predicts window `i + 1`, i.e. `labels[i]` and
/// `growth[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSample {
    pub id: String,
    /// Post feature vector.
    pub post: Vec<f64>,
    /// Mean comment feature vector of each valid window.
    pub windows: Vec<Vec<f64>>,
    /// Time coordinate of every step `0..=N`.
    pub taus: Vec<f64>,
    pub labels: Vec<Vec<u8>>,
    pub growth: Vec<GrowthTarget>,
    /// Author vector per comment position, `None` for non-embedded authors.
    pub commenters: Vec<Option<Vec<f64>>>,
    /// Per-step, per-cluster aggregate features for the logistic baseline.
    pub logreg: Vec<Vec<Vec<f64>>>,
    /// Cluster indices of distinct embedded users engaged up to each window.
    pub engaged: Vec<Vec<usize>>,
}

impl TemporalSample {
    pub fn steps(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NontemporalSample {
    pub id: String,
    pub post: Vec<f64>,
    /// Post features plus author vector for the logistic baseline.
    pub logreg: Vec<f64>,
    /// Whether the post attracted any comment.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub post_width: usize,
    pub comment_width: usize,
    pub logreg_width: usize,
    /// User-embedding dimension.
    pub dim: usize,
    pub clusters: usize,
    pub window_size: usize,
    pub max_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalDataset {
    pub shape: DatasetShape,
    pub centers: Vec<Vec<f64>>,
    pub train: Vec<TemporalSample>,
    pub test: Vec<TemporalSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NontemporalDataset {
    pub shape: DatasetShape,
    pub centers: Vec<Vec<f64>>,
    pub train: Vec<NontemporalSample>,
    pub test: Vec<NontemporalSample>,
}

/// Prediction for one step of one discussion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub y1: Vec<f64>,
    pub y2: f64,
}

impl StepOutput {
    /// Binary decisions at the 0.5 threshold.
    pub fn decisions(&self) -> Vec<u8> {
        self.y1.iter().map(|&p| u8::from(p > 0.5)).collect()
    }
}

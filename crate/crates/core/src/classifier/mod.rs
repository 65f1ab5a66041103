//! Two-hidden-layer feed-forward spot classifier and per-image voting.

mod mlp;
mod persist;
mod train;
mod vote;

pub use mlp::{backprop_gradients, batch_gradients, forward, normalize_features, FeatureStats, Gradients, Layer, MlpModel};
pub use persist::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, train_with_history, Sample, TrainingConfig, TrainingHistory};
pub use vote::{classify_image, evaluate, tally_votes, AccuracyReport, ImageOutcome, LabeledImage};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("input has {got} values, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset holds only {0} samples; both classes are required")]
    SingleClassDataset(DiseaseClass),
    #[error("no spots to classify")]
    NoSpots,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

/// The two rice diseases, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum DiseaseClass {
    LeafBlast,
    BrownSpot,
}

impl DiseaseClass {
    pub const ALL: [DiseaseClass; 2] = [DiseaseClass::LeafBlast, DiseaseClass::BrownSpot];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Lowercase slug used in corpus paths and CSV files.
    pub fn slug(self) -> &'static str {
        match self {
            DiseaseClass::LeafBlast => "leafblast",
            DiseaseClass::BrownSpot => "brownspot",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.slug() == s || format!("{c:?}") == s)
    }
}

impl std::fmt::Display for DiseaseClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpotPrediction<T> {
    /// Indexed by `DiseaseClass::index`.
    pub probabilities: [T; 2],
    pub predicted_class: DiseaseClass,
}

impl<T: Scalar> SpotPrediction<T> {
    /// Argmax; equal probabilities go to the first class.
    pub fn from_probabilities(probabilities: [T; 2]) -> Self {
        let predicted_class =
            if probabilities[1] > probabilities[0] { DiseaseClass::BrownSpot } else { DiseaseClass::LeafBlast };
        SpotPrediction { probabilities, predicted_class }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Diagnosis<T> {
    pub image_id: String,
    pub spot_predictions: Vec<SpotPrediction<T>>,
    /// Votes per class, indexed by `DiseaseClass::index`.
    pub votes: [usize; 2],
    pub final_class: DiseaseClass,
    /// Winning votes over total spots.
    pub confidence: T,
}

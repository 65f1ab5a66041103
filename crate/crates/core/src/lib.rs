//! Rice-leaf disease spot analysis and icon-path knowledge retrieval.
//!
//! The image side runs a fixed chain: size normalization and enhancement,
//! RGB to HSI conversion, a binary saturation mask, hue masking, histogram
//! thresholding, connected-component labeling, twelve morphological
//! descriptors per spot, and a two-hidden-layer network whose per-spot
//! predictions are combined by majority vote.
//!
//! The retrieval side resolves a path of icon selections through a taxonomy
//! into a localized knowledge-base entry.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod classifier;
pub mod features;
pub mod iconquery;
pub mod imaging;
pub mod pipeline;
pub mod pnm;
pub mod scalar;
pub mod segmentation;
pub mod synth;

pub use classifier::{Diagnosis, DiseaseClass, MlpModel, SpotPrediction, TrainingConfig};
pub use features::FeatureVector;
pub use imaging::{EnhanceParams, HsiPlanes, Plane, RgbImage};
pub use scalar::Scalar;
pub use segmentation::{BinaryMask, Histogram, LabeledRegions, MaskedPlane, Spot, ThresholdSpec};

pub type RgbImage64 = RgbImage<f64>;
pub type RgbImage32 = RgbImage<f32>;
pub type HsiPlanes64 = HsiPlanes<f64>;
pub type HsiPlanes32 = HsiPlanes<f32>;
pub type FeatureVector64 = FeatureVector<f64>;
pub type FeatureVector32 = FeatureVector<f32>;
pub type MlpModel64 = MlpModel<f64>;
pub type MlpModel32 = MlpModel<f32>;
pub type Diagnosis64 = Diagnosis<f64>;
pub type ThresholdSpec64 = ThresholdSpec<f64>;

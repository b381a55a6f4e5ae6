//! CAM classifier trained with an attention-consistency term.
//!
//! A fixed random filter bank turns each image into a `K x 16 x 16` stack of
//! rectified responses. The only trainable state is the class-weight matrix
//! shared by the pooled scores and the class activation maps, plus the
//! log-variance `u` of the consistency term.

mod features;
mod metrics;
mod model;
mod objective;
mod train;

pub use features::{extract_features, FeatureStack, FilterBank, GrayImage, DEFAULT_CHANNELS, FEATURE_GAIN, FEATURE_GRID, FILTER_SIZE, THRESHOLD_SD};
pub use metrics::{accuracy_and_mae, evaluate, Evaluation};
pub use model::{
    ac_loss, cam, class_scores, forward, mse_consistency, normalize_attention, softmax, CamOutput, ClassScores,
    ClassifierParams, NORMALIZE_EPS, U_MAX, U_MIN,
};
pub use objective::{gradients, total_loss, CamTarget, Example, Gradients, LossBreakdown, LossConfig};
pub use train::{train, AdamConfig, EpochRecord, History, Split, TrainConfig};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("image {width}x{height} does not split into a {FEATURE_GRID}x{FEATURE_GRID} grid of patches at least {FILTER_SIZE} wide")]
    BadGeometry { width: usize, height: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("class {class} out of range for {classes} classes")]
    BadClass { class: usize, classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
}

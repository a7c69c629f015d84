//! Small differentiable models trained with per-point SGD, with hooks that
//! expose every step's gradients and parameters.

mod dataset;
mod model;
mod sgd;

pub use dataset::{Example, LabeledDataset};
pub use model::{
    grad, group_loss, loss, point_grad, point_loss, point_losses, sgd_step, LossKind, ModelKind, ModelSpec, ModelState,
    PROB_CLAMP,
};
pub use sgd::{
    train_full, train_on_subset, GradientBundle, HookResult, LearningRate, NoHook, SgdConfig, StepInfo, TrainingHook,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty subset")]
    EmptySubset,
    #[error("group (y={y}, z={z}) is empty")]
    EmptyGroup { y: u8, z: u8 },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("learning rate must be positive: {0}")]
    InvalidLearningRate(String),
    #[error("row index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("training hook failed: {0}")]
    Hook(#[source] Box<dyn std::error::Error + Send + Sync>),
}

impl PartialEq for TrainError {
    fn eq(&self, other: &Self) -> bool {
        use TrainError::*;
        match (self, other) {
            (EmptySubset, EmptySubset) => true,
            (EmptyGroup { y: a, z: b }, EmptyGroup { y: c, z: d }) => a == c && b == d,
            (InvalidSpec(a), InvalidSpec(b)) => a == b,
            (DimensionMismatch { expected: a, got: b }, DimensionMismatch { expected: c, got: d }) => a == c && b == d,
            (InvalidLearningRate(a), InvalidLearningRate(b)) => a == b,
            (IndexOutOfRange { index: a, len: b }, IndexOutOfRange { index: c, len: d }) => a == c && b == d,
            (Hook(a), Hook(b)) => a.to_string() == b.to_string(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

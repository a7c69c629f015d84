//! Per-step incremental values, Taylor feature columns, cumulative targets
//! and the composite trustworthiness value functions.
//!
//! Every value is oriented so that positive means improvement: the accuracy
//! and robustness blocks hold loss decreases on validation points, the
//! fairness block holds the decrease in equalized-odds disparity.

mod fairness;
mod step;
mod target;

pub use fairness::{dp_disparity, eo_disparity, eo_disparity_from_losses, GroupIndex};
pub use step::{StepValue, StepValuer};
pub use target::{
    compose_target, cumulative_target, Block, BlockKind, CumulativeTarget, IncrementalValue, Layout, Pairing,
    ValueTarget,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dot;
use crate::trainkit::{point_losses, GradientBundle, LabeledDataset, ModelState, TrainError};

#[derive(Debug, Error, PartialEq)]
pub enum ValuationError {
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("group (y={y}, z={z}) is empty")]
    EmptyGroup { y: u8, z: u8 },
    #[error("no rows with sensitive attribute z={0}")]
    EmptySensitiveGroup(u8),
    #[error("row {0} has no sensitive attribute")]
    MissingSensitive(usize),
    #[error("lambda must lie in [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("layout mismatch: expected {expected}, got {got}")]
    LayoutMismatch { expected: String, got: String },
    #[error("invalid block pairing: {0}")]
    InvalidPairing(String),
    #[error("no increments to accumulate")]
    NoIncrements,
    #[error("pairing {0:?} needs an augmented validation set")]
    MissingAugmented(Pairing),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, ValuationError>;

/// How feature columns are computed for loss-based blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Second-order expansion in the gradient inner products.
    #[default]
    Taylor,
    /// The exact per-step loss decreases (oracle mode).
    Exact,
}

/// Shape of the fairness block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessBlock {
    /// One coordinate holding the exact per-step disparity decrease.
    #[default]
    Scalar,
    /// One coordinate per validation point: its loss decrease weighted by
    /// `+-1/|cell|` within the label that attains the disparity, so the block
    /// sums to the linearized disparity decrease.
    PerPoint,
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(ValuationError::InvalidLambda(lambda))
    }
}

fn loss_decrease(before: &ModelState, after: &ModelState, data: &LabeledDataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(ValuationError::EmptyValidationSet);
    }
    let b = point_losses(before, data);
    let a = point_losses(after, data);
    Ok(b.iter().zip(&a).map(|(x, y)| x - y).collect())
}

/// Per-validation-point loss decrease across one SGD step (accuracy block).
pub fn incremental_value_exact(
    before: &ModelState,
    after: &ModelState,
    valset: &LabeledDataset,
) -> Result<IncrementalValue> {
    let values = loss_decrease(before, after, valset)?;
    Ok(IncrementalValue::single(BlockKind::Accuracy, values))
}

/// Per-augmented-point loss decrease across one SGD step (robustness block).
pub fn robustness_increment(
    before: &ModelState,
    after: &ModelState,
    augmented: &LabeledDataset,
) -> Result<IncrementalValue> {
    let values = loss_decrease(before, after, augmented)?;
    Ok(IncrementalValue::single(BlockKind::Robustness, values))
}

/// Decrease in equalized-odds disparity across one step (single-coordinate
/// fairness block).
pub fn fairness_increment(before: &ModelState, after: &ModelState, valset: &LabeledDataset) -> Result<IncrementalValue> {
    let delta = eo_disparity(before, valset)? - eo_disparity(after, valset)?;
    Ok(IncrementalValue::single(BlockKind::Fairness, vec![delta]))
}

/// Second-order feature of one training step against each probe point.
///
/// With `a_j = g_train . g_j`, coordinate `j` is `a_j + eta * a_j^2 / 2`, so
/// that `eta` times the feature is `eta*a_j + (eta*a_j)^2 / 2`, the expansion
/// of the loss decrease in the step-scaled inner product. At `eta = 1` this
/// is `a_j + a_j^2 / 2`. The result is not normalized.
pub fn taylor_feature(bundle: &GradientBundle, eta: f64) -> Vec<f64> {
    bundle
        .val_gradients
        .iter()
        .map(|g| {
            let a = dot(&bundle.train_gradient, g);
            a + eta * a * a / 2.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainkit::{Example, ModelSpec};

    fn scalar_model(theta: f64) -> ModelState {
        ModelState::from_params(ModelSpec::linear(1).without_bias(), vec![theta]).unwrap()
    }

    #[test]
    fn no_update_gives_zero_increment() {
        let m = scalar_model(0.3);
        let v = LabeledDataset::new(vec![Example::new(vec![1.0], 1.0), Example::new(vec![2.0], 0.0)]);
        assert_eq!(incremental_value_exact(&m, &m, &v).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(robustness_increment(&m, &m, &v).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn half_squared_increment_arithmetic() {
        // loss 0.5 at theta=0 (x=1,y=1), 0.32 at theta=0.2.
        let v = LabeledDataset::new(vec![Example::new(vec![1.0], 1.0)]);
        let inc = incremental_value_exact(&scalar_model(0.0), &scalar_model(0.2), &v).unwrap();
        assert!((inc.values[0] - 0.18).abs() < 1e-15);
    }

    #[test]
    fn identity_perturbation_matches_accuracy_block() {
        let v = LabeledDataset::new(vec![Example::new(vec![1.0], 1.0), Example::new(vec![-1.0], 0.5)]);
        let (a, b) = (scalar_model(0.1), scalar_model(0.4));
        assert_eq!(incremental_value_exact(&a, &b, &v).unwrap().values, robustness_increment(&a, &b, &v).unwrap().values);
    }

    #[test]
    fn empty_validation_set_is_an_error() {
        let m = scalar_model(0.0);
        assert_eq!(
            incremental_value_exact(&m, &m, &LabeledDataset::default()).unwrap_err(),
            ValuationError::EmptyValidationSet
        );
    }

    #[test]
    fn taylor_feature_examples() {
        let orth = GradientBundle { train_gradient: vec![1.0, 0.0], val_gradients: vec![vec![0.0, 2.0]] };
        assert_eq!(taylor_feature(&orth, 1.0), vec![0.0]);
        let unit = GradientBundle { train_gradient: vec![1.0, 0.0], val_gradients: vec![vec![1.0, 5.0]] };
        assert_eq!(taylor_feature(&unit, 1.0), vec![1.5]);
    }
}

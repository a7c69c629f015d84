//! Online sparse approximation over streaming feature columns.
//!
//! A [`SelectionBuffer`] holds at most `capacity` unit-norm columns with
//! least-squares coefficients against the current target. While the buffer
//! is filling, every incoming column is inserted. Once full, [`data_replace`]
//! decides whether the incoming column evicts a buffered one: the incoming
//! projection on the residual must beat the buffered column's projection, the
//! buffered coefficient must be non-positive, and among qualifiers the one
//! with the largest `projection + coefficient` is evicted.
//!
//! [`batch_omp`] is the classical offline pursuit kept as a reference, and
//! [`check_eviction_rule`] evaluates the sufficient conditions under which an
//! optimal incoming column displaces a non-optimal buffered one.

mod buffer;
mod omp;
mod replace;
mod theorem;
mod trace;

pub use buffer::{refit_coefficients, BufferEntry, RefitReport, SelectionBuffer};
pub use omp::{batch_omp, OmpResult};
pub use replace::{data_replace, run_vtrust, vtrust_step, EpochBatch, OnlineSelector, Outcome, ReplaceDecision};
pub use theorem::{check_eviction_rule, predict_eviction, EntryCondition, TheoremReport};
pub use trace::{SolverTrace, TraceRecord, TraceSummary};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::linalg::{dot, norm};

/// Columns with a norm below this cannot be normalized.
pub const ZERO_COLUMN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("feature column has norm {norm:e}, below {ZERO_COLUMN_TOL:e}")]
    ZeroColumn { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("buffer capacity must be positive")]
    EmptyBufferCapacity,
    #[error("data_replace called on a buffer with {len} of {capacity} slots used")]
    BufferNotFull { len: usize, capacity: usize },
    #[error("column stream is empty")]
    EmptyStream,
    #[error("refit requested on an empty buffer")]
    EmptyBuffer,
    #[error("column {0} is already buffered")]
    DuplicateColumn(ColumnId),
    #[error("requested {k} columns from a pool of {available}")]
    TooManyColumns { k: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, SelectError>;

/// Identifies one feature column: the training datapoint it came from and the
/// epoch in which its features were computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnId {
    pub epoch: u32,
    pub datapoint: usize,
}

impl ColumnId {
    pub fn new(epoch: u32, datapoint: usize) -> Self {
        Self { epoch, datapoint }
    }
}

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(epoch {}, point {})", self.epoch, self.datapoint)
    }
}

/// One feature vector over the value-coordinate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub id: ColumnId,
    pub values: Vec<f64>,
    /// Set once `values` has been scaled to unit Euclidean norm.
    pub norm_certified: bool,
}

impl FeatureColumn {
    /// Wraps raw values without normalizing them.
    pub fn raw(id: ColumnId, values: Vec<f64>) -> Self {
        Self { id, values, norm_certified: false }
    }

    /// Normalizes `raw` to unit norm.
    pub fn normalized(id: ColumnId, raw: &[f64]) -> Result<Self> {
        Ok(Self { id, values: normalize_column(raw)?, norm_certified: true })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Returns a normalized copy, or `self` if already certified.
    pub fn into_normalized(self) -> Result<Self> {
        if self.norm_certified {
            Ok(self)
        } else {
            Self::normalized(self.id, &self.values)
        }
    }
}

/// Scales `raw` to unit Euclidean norm, preserving direction.
pub fn normalize_column(raw: &[f64]) -> Result<Vec<f64>> {
    let n = norm(raw);
    if !(n >= ZERO_COLUMN_TOL) {
        return Err(SelectError::ZeroColumn { norm: n });
    }
    Ok(raw.iter().map(|v| v / n).collect())
}

/// `|<column, residual>|`
pub fn project(column: &[f64], residual: &[f64]) -> Result<f64> {
    if column.len() != residual.len() {
        return Err(SelectError::DimensionMismatch { expected: residual.len(), got: column.len() });
    }
    Ok(dot(column, residual).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let v = normalize_column(&[3.0, 4.0]).unwrap();
        assert_eq!(v, vec![0.6, 0.8]);
        assert_eq!(normalize_column(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(normalize_column(&[0.0, 0.0]), Err(SelectError::ZeroColumn { .. })));
        assert!(matches!(normalize_column(&[f64::NAN]), Err(SelectError::ZeroColumn { .. })));
    }

    #[test]
    fn project_examples() {
        assert_eq!(project(&[1.0, 0.0], &[0.5, 0.0]).unwrap(), 0.5);
        assert_eq!(project(&[0.0, 1.0], &[0.5, 0.0]).unwrap(), 0.0);
        assert!((project(&[0.6, 0.8], &[1.0, -1.0]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(
            project(&[1.0], &[1.0, 2.0]),
            Err(SelectError::DimensionMismatch { expected: 2, got: 1 })
        );
    }
}

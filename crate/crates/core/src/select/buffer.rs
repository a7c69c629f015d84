use serde::Serialize;

use super::{ColumnId, FeatureColumn, Result, SelectError};
use crate::linalg::{axpy, dot, norm, sub, GramFactor};

/// One buffered column with its current coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BufferEntry {
    pub id: ColumnId,
    pub column: FeatureColumn,
    pub coefficient: f64,
}

/// Outcome of a least-squares refit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefitReport {
    pub residual_norm: f64,
    /// The Gram system was singular and the ridge fallback was used.
    pub rank_deficient: bool,
}

/// The bounded selected set together with its coefficients and the cached
/// approximation `sum(beta * column)`.
///
/// Entries are kept in insertion order; eviction removes an entry and the
/// replacement is appended at the end.
#[derive(Debug, Clone)]
pub struct SelectionBuffer {
    capacity: usize,
    dim: usize,
    entries: Vec<BufferEntry>,
    approximation: Vec<f64>,
    factor: GramFactor,
    /// Target of the last refit; `None` after any membership change.
    fitted_target: Option<Vec<f64>>,
    pub(crate) projection_floor: f64,
}

impl SelectionBuffer {
    /// Relative noise floor for the replacement gate; see [`super::data_replace`].
    pub const DEFAULT_PROJECTION_FLOOR: f64 = 1e-10;

    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(SelectError::EmptyBufferCapacity);
        }
        Ok(Self {
            capacity,
            dim,
            entries: Vec::with_capacity(capacity.min(4096)),
            approximation: vec![0.0; dim],
            factor: GramFactor::default(),
            fitted_target: None,
            projection_floor: Self::DEFAULT_PROJECTION_FLOOR,
        })
    }

    /// Builds a full or partial buffer with externally chosen coefficients.
    /// The approximation is computed from those coefficients; no refit runs.
    pub fn with_coefficients(
        capacity: usize,
        dim: usize,
        entries: impl IntoIterator<Item = (FeatureColumn, f64)>,
    ) -> Result<Self> {
        let mut buf = Self::new(capacity, dim)?;
        for (col, beta) in entries {
            buf.insert(col)?;
            buf.entries.last_mut().expect("just inserted").coefficient = beta;
        }
        buf.recompute_approximation();
        Ok(buf)
    }

    /// Overrides the relative gate floor (0 disables it).
    pub fn set_projection_floor(&mut self, floor: f64) {
        self.projection_floor = floor.max(0.0);
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub fn approximation(&self) -> &[f64] {
        &self.approximation
    }

    pub fn contains(&self, id: ColumnId) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn ids(&self) -> Vec<ColumnId> {
        self.entries.iter().map(|e| e.id).collect()
    }

    /// `target - approximation`
    pub fn residual(&self, target: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(target.len())?;
        Ok(sub(target, &self.approximation))
    }

    /// True if coefficients are the least-squares fit of exactly this target.
    pub fn is_fitted_to(&self, target: &[f64]) -> bool {
        self.fitted_target.as_deref() == Some(target)
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(SelectError::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }

    /// Appends a column with a zero placeholder coefficient. The caller must
    /// refit before the coefficients are used.
    pub fn insert(&mut self, column: FeatureColumn) -> Result<()> {
        self.check_dim(column.dim())?;
        if self.is_full() {
            return Err(SelectError::BufferNotFull { len: self.len(), capacity: self.capacity });
        }
        if self.contains(column.id) {
            return Err(SelectError::DuplicateColumn(column.id));
        }
        let cross: Vec<f64> = self.entries.iter().map(|e| dot(&e.column.values, &column.values)).collect();
        let self_dot = dot(&column.values, &column.values);
        self.factor.push(&cross, self_dot);
        self.entries.push(BufferEntry { id: column.id, column, coefficient: 0.0 });
        self.fitted_target = None;
        Ok(())
    }

    /// Removes the entry at `index` and returns it.
    pub(crate) fn evict(&mut self, index: usize) -> BufferEntry {
        self.factor.remove(index);
        self.fitted_target = None;
        self.entries.remove(index)
    }

    /// Least-squares refit of all coefficients against `target`, updating the
    /// cached approximation.
    pub fn refit(&mut self, target: &[f64]) -> Result<RefitReport> {
        self.check_dim(target.len())?;
        if self.entries.is_empty() {
            return Err(SelectError::EmptyBuffer);
        }
        let rhs: Vec<f64> = self.entries.iter().map(|e| dot(&e.column.values, target)).collect();
        let beta = self.factor.solve(&rhs);
        for (entry, b) in self.entries.iter_mut().zip(beta) {
            entry.coefficient = b;
        }
        self.recompute_approximation();
        self.fitted_target = Some(target.to_vec());
        Ok(RefitReport {
            residual_norm: norm(&sub(target, &self.approximation)),
            rank_deficient: self.factor.is_regularized(),
        })
    }

    fn recompute_approximation(&mut self) {
        let mut xi = vec![0.0; self.dim];
        for e in &self.entries {
            axpy(&mut xi, e.coefficient, &e.column.values);
        }
        self.approximation = xi;
    }

    /// Sets coefficients directly, e.g. to construct test states.
    pub fn set_coefficients(&mut self, coefficients: &[f64]) -> Result<()> {
        if coefficients.len() != self.entries.len() {
            return Err(SelectError::DimensionMismatch { expected: self.entries.len(), got: coefficients.len() });
        }
        for (e, &b) in self.entries.iter_mut().zip(coefficients) {
            e.coefficient = b;
        }
        self.recompute_approximation();
        self.fitted_target = None;
        Ok(())
    }
}

/// Refits the buffer against `target` and returns the new coefficients.
pub fn refit_coefficients(buffer: &mut SelectionBuffer, target: &[f64]) -> Result<Vec<f64>> {
    buffer.refit(target)?;
    Ok(buffer.entries.iter().map(|e| e.coefficient).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(p: usize, v: &[f64]) -> FeatureColumn {
        FeatureColumn::normalized(ColumnId::new(1, p), v).unwrap()
    }

    #[test]
    fn refit_single_unit_column() {
        let mut b = SelectionBuffer::new(2, 2).unwrap();
        b.insert(col(0, &[1.0, 0.0])).unwrap();
        assert_eq!(refit_coefficients(&mut b, &[2.0, 3.0]).unwrap(), vec![2.0]);
        assert_eq!(b.approximation(), &[2.0, 0.0]);
    }

    #[test]
    fn refit_orthonormal_basis() {
        let mut b = SelectionBuffer::new(2, 2).unwrap();
        b.insert(col(0, &[1.0, 0.0])).unwrap();
        b.insert(col(1, &[0.0, 1.0])).unwrap();
        let beta = refit_coefficients(&mut b, &[2.0, 3.0]).unwrap();
        assert!((beta[0] - 2.0).abs() < 1e-14 && (beta[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn refit_oblique_pair_matches_normal_equations() {
        // Hand-solved: G = [[1, s],[s, 1]], b = [1, 2s] with s = 1/sqrt2.
        // det = 1/2; beta = 2*[1 - 2s^2, 2s - s] = [0, sqrt2].
        let s = 0.5f64.sqrt();
        let mut b = SelectionBuffer::new(2, 2).unwrap();
        b.insert(col(0, &[1.0, 0.0])).unwrap();
        b.insert(col(1, &[s, s])).unwrap();
        let beta = refit_coefficients(&mut b, &[1.0, 1.0]).unwrap();
        assert!(beta[0].abs() < 1e-12, "{beta:?}");
        assert!((beta[1] - 2f64.sqrt()).abs() < 1e-12);
        let r = b.residual(&[1.0, 1.0]).unwrap();
        assert!(norm(&r) < 1e-12);
    }

    #[test]
    fn empty_buffer_refit_and_zero_capacity_error() {
        assert_eq!(SelectionBuffer::new(0, 3).unwrap_err(), SelectError::EmptyBufferCapacity);
        let mut b = SelectionBuffer::new(1, 2).unwrap();
        assert_eq!(b.refit(&[1.0, 0.0]).unwrap_err(), SelectError::EmptyBuffer);
    }

    #[test]
    fn duplicate_and_overflow_inserts_rejected() {
        let mut b = SelectionBuffer::new(1, 2).unwrap();
        b.insert(col(0, &[1.0, 0.0])).unwrap();
        assert!(matches!(b.insert(col(1, &[0.0, 1.0])), Err(SelectError::BufferNotFull { .. })));
        let mut b = SelectionBuffer::new(2, 2).unwrap();
        b.insert(col(0, &[1.0, 0.0])).unwrap();
        assert_eq!(b.insert(col(0, &[0.0, 1.0])), Err(SelectError::DuplicateColumn(ColumnId::new(1, 0))));
    }

    #[test]
    fn rank_deficient_refit_is_flagged() {
        let mut b = SelectionBuffer::new(2, 2).unwrap();
        b.insert(col(0, &[1.0, 0.0])).unwrap();
        b.insert(FeatureColumn::normalized(ColumnId::new(2, 0), &[1.0, 0.0]).unwrap()).unwrap();
        let rep = b.refit(&[2.0, 1.0]).unwrap();
        assert!(rep.rank_deficient);
        assert!((rep.residual_norm - 1.0).abs() < 1e-6);
    }
}

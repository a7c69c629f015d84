use serde::Serialize;

use super::{ColumnId, FeatureColumn, Result, SelectError};
use crate::linalg::{axpy, dot, least_squares, sub};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmpResult {
    /// Indices into the input column slice, in selection order.
    pub support: Vec<usize>,
    pub ids: Vec<ColumnId>,
    pub coefficients: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Classical orthogonal matching pursuit: `k` rounds, each adding the column
/// with the largest `|x . rho|` over the whole pool and refitting.
pub fn batch_omp(columns: &[FeatureColumn], target: &[f64], k: usize) -> Result<OmpResult> {
    if k > columns.len() {
        return Err(SelectError::TooManyColumns { k, available: columns.len() });
    }
    if let Some(bad) = columns.iter().find(|c| c.dim() != target.len()) {
        return Err(SelectError::DimensionMismatch { expected: target.len(), got: bad.dim() });
    }
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut coefficients = Vec::new();
    let mut residual = target.to_vec();
    for _ in 0..k {
        let best = columns
            .iter()
            .enumerate()
            .filter(|(i, _)| !support.contains(i))
            .map(|(i, c)| (i, dot(&c.values, &residual).abs()))
            .fold(None, |acc: Option<(usize, f64)>, (i, p)| match acc {
                Some((_, bp)) if bp >= p => acc,
                _ => Some((i, p)),
            });
        let Some((idx, _)) = best else { break };
        support.push(idx);
        let cols: Vec<&[f64]> = support.iter().map(|&i| columns[i].values.as_slice()).collect();
        coefficients = least_squares(&cols, target).0;
        let mut approx = vec![0.0; target.len()];
        for (c, b) in cols.iter().zip(&coefficients) {
            axpy(&mut approx, *b, c);
        }
        residual = sub(target, &approx);
    }
    Ok(OmpResult { ids: support.iter().map(|&i| columns[i].id).collect(), support, coefficients, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, d: usize) -> FeatureColumn {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        FeatureColumn::normalized(ColumnId::new(1, i), &v).unwrap()
    }

    #[test]
    fn picks_largest_projection_on_orthonormal_set() {
        let cols = vec![e(0, 3), e(1, 3), e(2, 3)];
        let r = batch_omp(&cols, &[2.0, 3.0, 0.0], 1).unwrap();
        assert_eq!(r.support, vec![1]);
        assert!((r.coefficients[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rounds_leave_target_as_residual() {
        let cols = vec![e(0, 2)];
        let r = batch_omp(&cols, &[2.0, 3.0], 0).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.residual, vec![2.0, 3.0]);
    }

    #[test]
    fn rejects_oversized_k() {
        assert!(matches!(batch_omp(&[e(0, 2)], &[1.0, 0.0], 2), Err(SelectError::TooManyColumns { .. })));
    }
}

//! Small dense vector helpers and the Gram-system solvers used by the selector.
//!
//! Problem sizes here are desk scale (buffers of at most a few thousand columns),
//! so everything is plain `Vec<f64>` with row-major square matrices.

/// Diagonal ridge added when a Gram system turns out to be singular.
pub const RIDGE: f64 = 1e-10;

/// A pivot below this (relative to the column's squared norm) marks a
/// linearly dependent column.
pub(crate) const RANK_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `acc += scale * x`
pub fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}

/// Solves `min ||y - A beta||` where `A` has the given columns, via the normal
/// equations and a Cholesky factorization. Falls back to `G + RIDGE*I` when
/// the Gram matrix is singular; the returned flag reports that fallback.
pub fn least_squares(columns: &[&[f64]], y: &[f64]) -> (Vec<f64>, bool) {
    let n = columns.len();
    if n == 0 {
        return (Vec::new(), false);
    }
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let g = dot(columns[i], columns[j]);
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let rhs: Vec<f64> = columns.iter().map(|c| dot(c, y)).collect();
    match cholesky(&gram, n, 0.0) {
        Some(l) => (cholesky_solve(&l, n, &rhs), false),
        None => {
            let l = cholesky(&gram, n, RIDGE).unwrap_or_else(|| forced_cholesky(&gram, n, RIDGE));
            (cholesky_solve(&l, n, &rhs), true)
        }
    }
}

/// Lower Cholesky factor of `a + ridge*I`, or `None` if a pivot collapses.
fn cholesky(a: &[f64], n: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += ridge;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                let scale = a[i * n + i].abs().max(1.0);
                if ridge == 0.0 && s <= RANK_TOL * scale {
                    return None;
                }
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky that floors collapsed pivots at `sqrt(ridge)` instead of failing.
fn forced_cholesky(a: &[f64], n: usize, ridge: f64) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += ridge;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                l[i * n + i] = s.max(ridge).sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    l
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Cholesky factor of a Gram matrix maintained under column append and
/// removal, so a full buffer can swap one column in `O(n^2)` instead of
/// refactoring in `O(n^3)`.
///
/// Column order matches the owning buffer's entry order.
#[derive(Debug, Clone, Default)]
pub(crate) struct GramFactor {
    /// Exact Gram matrix, one row per column.
    gram: Vec<Vec<f64>>,
    /// Lower-triangular factor of `gram + ridge*I`, stored as full rows.
    chol: Vec<Vec<f64>>,
    ridge: f64,
}

impl GramFactor {
    pub fn len(&self) -> usize {
        self.gram.len()
    }

    /// True while the factor carries the ridge fallback.
    pub fn is_regularized(&self) -> bool {
        self.ridge > 0.0
    }

    /// Appends a column given its inner products with the existing columns
    /// (`cross`) and with itself. Returns true when the column was linearly
    /// dependent and the ridge fallback had to be switched on.
    pub fn push(&mut self, cross: &[f64], self_dot: f64) -> bool {
        let n = self.len();
        debug_assert_eq!(cross.len(), n);
        for (row, &c) in self.gram.iter_mut().zip(cross) {
            row.push(c);
        }
        let mut new_row = cross.to_vec();
        new_row.push(self_dot);
        self.gram.push(new_row);

        // Forward substitution for the new factor row.
        let mut l = vec![0.0; n + 1];
        for i in 0..n {
            let mut s = cross[i];
            for k in 0..i {
                s -= self.chol[i][k] * l[k];
            }
            l[i] = s / self.chol[i][i];
        }
        let d2 = self_dot + self.ridge - dot(&l[..n], &l[..n]);
        let scale = self_dot.abs().max(1.0);
        if self.ridge == 0.0 && d2 <= RANK_TOL * scale {
            self.ridge = RIDGE;
            self.refactor();
            return true;
        }
        l[n] = d2.max(self.ridge).max(f64::MIN_POSITIVE).sqrt();
        for row in self.chol.iter_mut() {
            row.push(0.0);
        }
        self.chol.push(l);
        false
    }

    /// Removes column `idx`, restoring triangularity with Givens rotations.
    pub fn remove(&mut self, idx: usize) {
        let n = self.len();
        assert!(idx < n);
        self.gram.remove(idx);
        for row in self.gram.iter_mut() {
            row.remove(idx);
        }
        self.chol.remove(idx);
        // Rows idx.. now have one entry above the diagonal at column k+1.
        for k in idx..n - 1 {
            let a = self.chol[k][k];
            let b = self.chol[k][k + 1];
            let r = a.hypot(b);
            if r == 0.0 {
                continue;
            }
            let (c, s) = (a / r, b / r);
            for row in self.chol[k..].iter_mut() {
                let (u, v) = (row[k], row[k + 1]);
                row[k] = c * u + s * v;
                row[k + 1] = -s * u + c * v;
            }
        }
        for row in self.chol.iter_mut() {
            row.pop();
        }
        if self.ridge > 0.0 {
            let min_pivot = self
                .chol
                .iter()
                .enumerate()
                .map(|(i, row)| row[i] * row[i])
                .fold(f64::INFINITY, f64::min);
            // Leave ridge mode once the remaining columns are clearly independent.
            if min_pivot > 1e-6 {
                self.ridge = 0.0;
                self.refactor();
            }
        }
    }

    /// Rebuilds the factor from the stored Gram matrix.
    pub fn refactor(&mut self) {
        let n = self.len();
        let flat: Vec<f64> = self.gram.iter().flatten().copied().collect();
        let l = match cholesky(&flat, n, self.ridge) {
            Some(l) => l,
            None => {
                if self.ridge == 0.0 {
                    self.ridge = RIDGE;
                }
                cholesky(&flat, n, self.ridge).unwrap_or_else(|| forced_cholesky(&flat, n, self.ridge))
            }
        };
        self.chol = l.chunks(n.max(1)).take(n).map(|r| r.to_vec()).collect();
    }

    /// Solves `(G + ridge*I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut z = vec![0.0; n];
        for i in 0..n {
            let row = &self.chol[i];
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * z[k];
            }
            z[i] = s / row[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.chol[k][i] * x[k];
            }
            x[i] = s / self.chol[i][i];
        }
        x
    }

    #[cfg(test)]
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                out[i][j] = (0..n).map(|k| self.chol[i][k] * self.chol[j][k]).sum();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = norm(v);
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn least_squares_two_columns_matches_hand_solution() {
        // columns (1,0) and (1/sqrt2,1/sqrt2), y=(1,1): y = 0*(1,0) + sqrt2*(..)
        let s = 0.5f64.sqrt();
        let a = [1.0, 0.0];
        let b = [s, s];
        let (beta, deficient) = least_squares(&[&a, &b], &[1.0, 1.0]);
        assert!(!deficient);
        assert!(beta[0].abs() < 1e-12);
        assert!((beta[1] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn least_squares_duplicate_columns_uses_ridge() {
        let a = [1.0, 0.0];
        let (beta, deficient) = least_squares(&[&a, &a], &[2.0, 0.0]);
        assert!(deficient);
        // Minimum-norm split between the two copies.
        assert!((beta[0] + beta[1] - 2.0).abs() < 1e-6);
        assert!((beta[0] - beta[1]).abs() < 1e-6);
    }

    #[test]
    fn factor_tracks_gram_under_push_and_remove() {
        let cols: Vec<Vec<f64>> = vec![
            unit(&[1.0, 0.2, 0.0, 0.3]),
            unit(&[0.1, 1.0, 0.4, 0.0]),
            unit(&[0.0, 0.3, 1.0, 0.2]),
            unit(&[0.5, 0.0, 0.1, 1.0]),
        ];
        let mut f = GramFactor::default();
        let mut live: Vec<usize> = Vec::new();
        let push = |f: &mut GramFactor, live: &mut Vec<usize>, c: usize| {
            let cross: Vec<f64> = live.iter().map(|&j| dot(&cols[j], &cols[c])).collect();
            assert!(!f.push(&cross, dot(&cols[c], &cols[c])));
            live.push(c);
        };
        for c in 0..4 {
            push(&mut f, &mut live, c);
        }
        f.remove(1);
        live.remove(1);
        push(&mut f, &mut live, 1);
        f.remove(0);
        live.remove(0);
        let rec = f.reconstruct();
        for (i, &a) in live.iter().enumerate() {
            for (j, &b) in live.iter().enumerate() {
                assert!((rec[i][j] - dot(&cols[a], &cols[b])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factor_enters_and_leaves_ridge_mode() {
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0];
        let mut f = GramFactor::default();
        f.push(&[], 1.0);
        assert!(f.push(&[1.0], 1.0), "duplicate column must trip the ridge");
        assert!(f.is_regularized());
        f.remove(1);
        assert!(!f.is_regularized());
        f.push(&[dot(&a, &b)], 1.0);
        let x = f.solve(&[2.0, 3.0]);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }
}

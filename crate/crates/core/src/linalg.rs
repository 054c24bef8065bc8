//! Dense helpers: an updatable Cholesky factor of the active-set Gram matrix
//! and a few small least-squares utilities.

use nalgebra::DMatrix;

/// Result of trying to append a column to the factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Append {
    Added,
    /// Squared distance of the column from the current span was below the threshold.
    Collinear(f64),
}

/// Lower-triangular `L` with `L L^T = X_A^T X_A`, stored row by row.
#[derive(Debug, Clone, Default)]
pub(crate) struct ActiveCholesky {
    rows: Vec<Vec<f64>>,
}

/// Squared pivot below which a new column is treated as lying in the active span.
pub(crate) const COLLINEAR_PIVOT: f64 = 1e-10;
/// Conditioning (squared diagonal ratio) above which the factor is rebuilt.
pub(crate) const REFACTOR_CONDITION: f64 = 1e12;

impl ActiveCholesky {
    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Appends a column given its inner products with the active columns and itself.
    pub fn push(&mut self, cross: &[f64], self_dot: f64) -> Append {
        debug_assert_eq!(cross.len(), self.rows.len());
        let m = self.rows.len();
        let mut row = Vec::with_capacity(m + 1);
        for i in 0..m {
            let li = &self.rows[i];
            let s: f64 = li[..i].iter().zip(&row).map(|(a, b)| a * b).sum();
            row.push((cross[i] - s) / li[i]);
        }
        let pivot = self_dot - row.iter().map(|v| v * v).sum::<f64>();
        if pivot <= COLLINEAR_PIVOT * self_dot.max(f64::MIN_POSITIVE) {
            return Append::Collinear(pivot);
        }
        row.push(pivot.sqrt());
        self.rows.push(row);
        Append::Added
    }

    /// Removes the `k`-th active column and restores triangular form with Givens rotations.
    pub fn remove(&mut self, k: usize) {
        let m = self.rows.len();
        assert!(k < m);
        self.rows.remove(k);
        // Rows k.. now carry one extra entry to the right of the diagonal.
        for i in k..m - 1 {
            let a = self.rows[i][i];
            let b = self.rows[i][i + 1];
            let r = a.hypot(b);
            let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
            for row in self.rows[i..].iter_mut() {
                let x = row[i];
                let y = row[i + 1];
                row[i] = c * x + s * y;
                row[i + 1] = -s * x + c * y;
            }
            self.rows[i].truncate(i + 1);
            if self.rows[i][i] < 0.0 {
                for row in self.rows[i..].iter_mut() {
                    row[i] = -row[i];
                }
            }
        }
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        let mut z = vec![0.0; m];
        for i in 0..m {
            let s: f64 = self.rows[i][..i].iter().zip(&z).map(|(a, b)| a * b).sum();
            z[i] = (b[i] - s) / self.rows[i][i];
        }
        for i in (0..m).rev() {
            let mut s = z[i];
            for k in i + 1..m {
                s -= self.rows[k][i] * z[k];
            }
            z[i] = s / self.rows[i][i];
        }
        z
    }

    /// Squared ratio of the largest to the smallest diagonal entry.
    pub fn condition_estimate(&self) -> f64 {
        let (lo, hi) = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[i].abs())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if self.rows.is_empty() {
            1.0
        } else {
            (hi / lo).powi(2)
        }
    }

    /// Rebuilds the factor from scratch for the given columns of `x`.
    /// Returns the positions (within `cols`) that could not be added.
    pub fn refactor(x: &DMatrix<f64>, cols: &[usize]) -> (Self, Vec<usize>) {
        let mut f = ActiveCholesky::default();
        let mut kept: Vec<usize> = Vec::new();
        let mut rejected = Vec::new();
        for (pos, &j) in cols.iter().enumerate() {
            let xj = x.column(j);
            let cross: Vec<f64> = kept.iter().map(|&k| x.column(k).dot(&xj)).collect();
            match f.push(&cross, xj.dot(&xj)) {
                Append::Added => kept.push(j),
                Append::Collinear(_) => rejected.push(pos),
            }
        }
        (f, rejected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        // Small deterministic LCG, enough for shape tests.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DMatrix::from_fn(n, p, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    fn gram_of(f: &ActiveCholesky) -> DMatrix<f64> {
        let m = f.len();
        let l = DMatrix::from_fn(m, m, |i, j| if j <= i { f.rows[i][j] } else { 0.0 });
        &l * l.transpose()
    }

    #[test]
    fn push_then_remove_matches_refactor() {
        let x = random_matrix(12, 5, 7);
        let cols = [0, 1, 2, 3, 4];
        let (mut f, rejected) = ActiveCholesky::refactor(&x, &cols);
        assert!(rejected.is_empty());
        f.remove(1);
        let kept = [0, 2, 3, 4];
        let xa = x.select_columns(kept.iter());
        let want = xa.tr_mul(&xa);
        assert!((gram_of(&f) - want).amax() < 1e-12);
        f.remove(3);
        f.remove(0);
        let kept = [2, 3];
        let xa = x.select_columns(kept.iter());
        assert!((gram_of(&f) - xa.tr_mul(&xa)).amax() < 1e-12);
    }

    #[test]
    fn solve_matches_dense() {
        let x = random_matrix(10, 4, 3);
        let (f, _) = ActiveCholesky::refactor(&x, &[0, 1, 2, 3]);
        let b = [1.0, -2.0, 0.5, 3.0];
        let got = f.solve(&b);
        let gram = x.tr_mul(&x);
        let want = gram.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-9 * w.abs().max(1.0));
        }
    }

    #[test]
    fn duplicate_column_is_collinear() {
        let mut x = random_matrix(8, 3, 11);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &(c0 * 2.0));
        let (_, rejected) = ActiveCholesky::refactor(&x, &[0, 1, 2]);
        assert_eq!(rejected, vec![2]);
    }
}

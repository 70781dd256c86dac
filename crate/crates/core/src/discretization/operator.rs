use nalgebra::{DMatrix, DVector};

use super::banded::{BandLu, BandMatrix};
use crate::error::{MixturaError, Result};

/// Sparse linear operator assembled from `(row, col, value)` contributions.
///
/// Entries closer to the diagonal than half the dimension form the band; the
/// rest are periodic wrap-around couplings, eliminated at solve time by a
/// low-rank (Woodbury) correction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl DiscreteOperator {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Accumulates `v` into entry `(i, j)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "operand length mismatch");
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// Keeps the listed rows and columns, in the given order.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut row_map = vec![usize::MAX; self.rows];
        for (k, &r) in rows.iter().enumerate() {
            row_map[r] = k;
        }
        let mut col_map = vec![usize::MAX; self.cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut out = Self::new(rows.len(), cols.len());
        for &(i, j, v) in &self.entries {
            let (ri, cj) = (row_map[i], col_map[j]);
            if ri != usize::MAX && cj != usize::MAX {
                out.entries.push((ri, cj, v));
            }
        }
        out
    }

    fn is_wrap(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) > self.rows / 2
    }

    /// Half-bandwidths `(lower, upper)` of the non-wrap part.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for &(i, j, _) in &self.entries {
            if self.is_wrap(i, j) {
                continue;
            }
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    pub fn factor(&self) -> Result<OperatorSolver> {
        if self.rows != self.cols {
            return Err(MixturaError::Singular(format!(
                "cannot factor a {}x{} operator",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let (kl, ku) = self.bandwidth();
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut wraps: Vec<(usize, usize, f64)> = Vec::new();
        for &(i, j, v) in &self.entries {
            if self.is_wrap(i, j) {
                wraps.push((i, j, v));
            } else {
                band.add(i, j, v);
            }
        }
        let lu = band.factor()?;
        if wraps.is_empty() {
            return Ok(OperatorSolver { lu, wrap: None });
        }

        // A = B + U V^T with V selecting the wrap columns.
        let mut wrap_cols: Vec<usize> = wraps.iter().map(|&(_, j, _)| j).collect();
        wrap_cols.sort_unstable();
        wrap_cols.dedup();
        let k = wrap_cols.len();
        let mut z = Vec::with_capacity(k);
        for &c in &wrap_cols {
            let mut u = vec![0.0; n];
            for &(i, j, v) in &wraps {
                if j == c {
                    u[i] += v;
                }
            }
            lu.solve_in_place(&mut u);
            z.push(u);
        }
        let mut cap = DMatrix::<f64>::identity(k, k);
        for (a, &ca) in wrap_cols.iter().enumerate() {
            for (b, zb) in z.iter().enumerate() {
                cap[(a, b)] += zb[ca];
            }
        }
        let cap_lu = cap.lu();
        if !cap_lu.is_invertible() {
            return Err(MixturaError::Singular(
                "periodic capacitance matrix is singular".into(),
            ));
        }
        Ok(OperatorSolver {
            lu,
            wrap: Some(WrapCorrection {
                cols: wrap_cols,
                z,
                cap: cap_lu,
            }),
        })
    }
}

#[derive(Debug, Clone)]
struct WrapCorrection {
    cols: Vec<usize>,
    z: Vec<Vec<f64>>,
    cap: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Direct solver for a square [`DiscreteOperator`].
#[derive(Debug, Clone)]
pub struct OperatorSolver {
    lu: BandLu,
    wrap: Option<WrapCorrection>,
}

impl OperatorSolver {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.lu.solve(b);
        if let Some(w) = &self.wrap {
            let rhs = DVector::from_iterator(w.cols.len(), w.cols.iter().map(|&c| y[c]));
            let coef = w
                .cap
                .solve(&rhs)
                .ok_or_else(|| MixturaError::Singular("capacitance solve failed".into()))?;
            for (zk, ck) in w.z.iter().zip(coef.iter()) {
                for (yi, zi) in y.iter_mut().zip(zk) {
                    *yi -= ck * zi;
                }
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(MixturaError::Singular("non-finite solution".into()));
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Periodic 1-D Helmholtz operator `I - c * Laplacian` plus a random-ish skew part.
    fn periodic_operator(n: usize) -> DiscreteOperator {
        let mut op = DiscreteOperator::square(n);
        for i in 0..n {
            let l = (i + n - 1) % n;
            let r = (i + 1) % n;
            op.add(i, i, 1.0 + 2.0 * 0.7);
            op.add(i, l, -0.7 + 0.1 * (i as f64).sin());
            op.add(i, r, -0.7 - 0.2 * (i as f64).cos());
        }
        op
    }

    #[test]
    fn periodic_solve_matches_dense() {
        let n = 24;
        let op = periodic_operator(n);
        let x: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let b = op.apply(&x);
        let got = op.factor().unwrap().solve(&b).unwrap();
        let err = got.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "error {err}");
        assert_eq!(op.bandwidth(), (1, 1));
    }

    #[test]
    fn restrict_and_dense_agree() {
        let op = periodic_operator(10);
        let keep: Vec<usize> = (2..8).collect();
        let sub = op.restrict(&keep, &keep).to_dense();
        let full = op.to_dense();
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                assert_eq!(sub[(a, b)], full[(i, j)]);
            }
        }
    }

    #[test]
    fn non_square_factor_rejected() {
        assert!(DiscreteOperator::new(3, 4).factor().is_err());
    }
}

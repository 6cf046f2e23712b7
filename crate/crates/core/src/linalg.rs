//! Small dense-vector helpers, exactly symmetric sparse assembly and a
//! banded Cholesky factorization.
//!
//! Uniform meshes numbered lexicographically give matrices whose nonzeros
//! sit inside a narrow band (1 in 1D, `nx` in 2D), so a banded Cholesky
//! has no fill outside the band and is exact up to rounding.

use std::collections::BTreeMap;

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

pub type SparseMatrix = CsMat<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

pub fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: v.len(),
        });
    }
    Ok(())
}

/// Sparse matrix-vector product y = A x for a CSR matrix.
pub fn matvec(a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.cols(), x.len());
    let mut y = vec![0.0; a.rows()];
    for (row, vec) in a.outer_iterator().enumerate() {
        let mut s = 0.0;
        for (col, &v) in vec.iter() {
            s += v * x[col];
        }
        y[row] = s;
    }
    y
}

/// x^T A y
pub fn bilinear(a: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

/// Linear combination alpha*A + beta*B of two square CSR matrices.
pub fn lin_comb(alpha: f64, a: &SparseMatrix, beta: f64, b: &SparseMatrix) -> SparseMatrix {
    let mut acc = SymmetricAccumulator::new(a.rows());
    for (row, vec) in a.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            acc.add_entry(row, col, alpha * v);
        }
    }
    for (row, vec) in b.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            acc.add_entry(row, col, beta * v);
        }
    }
    acc.into_csr()
}

pub fn diagonal(a: &SparseMatrix) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.get(i, i).copied().unwrap_or(0.0))
        .collect()
}

/// Entrywise exact transpose comparison (zero tolerance).
pub fn is_exactly_symmetric(a: &SparseMatrix) -> bool {
    if a.rows() != a.cols() {
        return false;
    }
    for (row, vec) in a.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            match a.get(col, row) {
                Some(&w) if w == v => {}
                _ => return false,
            }
        }
    }
    true
}

/// Dense copy, for small oracles and rank computations.
pub fn to_dense(a: &SparseMatrix) -> nalgebra::DMatrix<f64> {
    let mut d = nalgebra::DMatrix::zeros(a.rows(), a.cols());
    for (row, vec) in a.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            d[(row, col)] = v;
        }
    }
    d
}

/// Accumulates element contributions in insertion order.
///
/// Symmetric pairs are added through [`SymmetricAccumulator::add_pair`], which
/// updates (i, j) and (j, i) with the same value in the same sequence, so the
/// assembled matrix equals its transpose bit for bit.
#[derive(Debug, Clone)]
pub struct SymmetricAccumulator {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SymmetricAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn add_entry(&mut self, i: usize, j: usize, v: f64) {
        *self.entries.entry((i, j)).or_insert(0.0) += v;
    }

    pub fn add_pair(&mut self, i: usize, j: usize, v: f64) {
        self.add_entry(i, j, v);
        if i != j {
            self.add_entry(j, i, v);
        }
    }

    pub fn into_csr(self) -> SparseMatrix {
        let mut tri = TriMat::new((self.n, self.n));
        for ((i, j), v) in self.entries {
            tri.add_triplet(i, j, v);
        }
        tri.to_csr()
    }
}

/// Cholesky factor L (A = L L^T) of a symmetric positive-definite band matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bandwidth: usize,
    /// Row-major lower band: entry (i, j), i - bandwidth <= j <= i, lives at
    /// `i * (bandwidth + 1) + (j + bandwidth - i)`.
    lower: Vec<f64>,
}

/// Lower-band copy of a symmetric matrix, editable before factorization.
#[derive(Debug, Clone)]
pub struct SymmetricBand {
    n: usize,
    bandwidth: usize,
    lower: Vec<f64>,
}

pub fn bandwidth(a: &SparseMatrix) -> usize {
    let mut bw = 0;
    for (row, vec) in a.outer_iterator().enumerate() {
        for (col, _) in vec.iter() {
            bw = bw.max(row.abs_diff(col));
        }
    }
    bw
}

impl SymmetricBand {
    pub fn from_sparse(a: &SparseMatrix) -> Self {
        Self::from_sparse_with_bandwidth(a, bandwidth(a))
    }

    pub fn from_sparse_with_bandwidth(a: &SparseMatrix, bandwidth: usize) -> Self {
        let n = a.rows();
        let w = bandwidth + 1;
        let mut lower = vec![0.0; n * w];
        for (row, vec) in a.outer_iterator().enumerate() {
            for (col, &v) in vec.iter() {
                if col <= row {
                    debug_assert!(row - col <= bandwidth);
                    lower[row * w + (col + bandwidth - row)] = v;
                }
            }
        }
        Self {
            n,
            bandwidth,
            lower,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bandwidth + 1) + (j + self.bandwidth - i)
    }

    pub fn add_diagonal(&mut self, i: usize, v: f64) {
        let k = self.idx(i, i);
        self.lower[k] += v;
    }

    /// Replace row and column `i` by the identity row/column.
    pub fn pin(&mut self, i: usize) {
        let bw = self.bandwidth;
        for j in i.saturating_sub(bw)..i {
            let k = self.idx(i, j);
            self.lower[k] = 0.0;
        }
        for r in (i + 1)..(i + bw + 1).min(self.n) {
            let k = self.idx(r, i);
            self.lower[k] = 0.0;
        }
        let k = self.idx(i, i);
        self.lower[k] = 1.0;
    }

    pub fn factor(self) -> Result<BandedCholesky> {
        BandedCholesky::factor_band(self)
    }
}

impl BandedCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        SymmetricBand::from_sparse(a).factor()
    }

    fn factor_band(band: SymmetricBand) -> Result<Self> {
        let SymmetricBand {
            n,
            bandwidth: bw,
            mut lower,
        } = band;
        let w = bw + 1;
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(lower[at(i, i)].abs()));
        // relative pivot floor; a zero row of a singular weight matrix lands here
        let floor = 64.0 * f64::EPSILON * max_diag;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = lower[at(i, j)];
                for k in klo..j {
                    s -= lower[at(i, k)] * lower[at(j, k)];
                }
                if i == j {
                    if !(s > floor) {
                        return Err(Error::Factorization {
                            pivot: i,
                            value: s,
                            max_diag,
                        });
                    }
                    lower[at(i, i)] = s.sqrt();
                } else {
                    lower[at(i, j)] = s / lower[at(j, j)];
                }
            }
        }
        Ok(Self {
            n,
            bandwidth: bw,
            lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let bw = self.bandwidth;
        let w = bw + 1;
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        // L z = b
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.lower[at(i, k)] * x[k];
            }
            x[i] = s / self.lower[at(i, i)];
        }
        // L^T x = z
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + w).min(n) {
                s -= self.lower[at(k, i)] * x[k];
            }
            x[i] = s / self.lower[at(i, i)];
        }
    }

    /// Smallest and largest squared pivots, a cheap conditioning indicator.
    pub fn pivot_range(&self) -> (f64, f64) {
        let w = self.bandwidth + 1;
        (0..self.n)
            .map(|i| self.lower[i * w + self.bandwidth].powi(2))
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| (lo.min(p), hi.max(p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lo: f64, d: f64) -> SparseMatrix {
        let mut acc = SymmetricAccumulator::new(n);
        for i in 0..n {
            acc.add_pair(i, i, d);
            if i + 1 < n {
                acc.add_pair(i, i + 1, lo);
            }
        }
        acc.into_csr()
    }

    #[test]
    fn banded_solve_matches_dense() {
        let a = tridiag(5, -1.0, 4.0);
        let chol = BandedCholesky::factor(&a).unwrap();
        let b = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let x = chol.solve(&b);
        let dense = to_dense(&a);
        let xd = dense
            .lu()
            .solve(&nalgebra::DVector::from_vec(b.clone()))
            .unwrap();
        for i in 0..5 {
            assert!((x[i] - xd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn wide_band_solve() {
        // 5-point Laplacian on a 4x4 grid has bandwidth 4
        let n = 4;
        let mut acc = SymmetricAccumulator::new(n * n);
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                acc.add_pair(k, k, 4.0);
                if i + 1 < n {
                    acc.add_pair(k, k + 1, -1.0);
                }
                if j + 1 < n {
                    acc.add_pair(k, k + n, -1.0);
                }
            }
        }
        let a = acc.into_csr();
        assert_eq!(bandwidth(&a), 4);
        let chol = BandedCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..n * n).map(|i| (i as f64).sin()).collect();
        let x = chol.solve(&b);
        let r = sub(&matvec(&a, &x), &b);
        assert!(norm_inf(&r) < 1e-13);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut acc = SymmetricAccumulator::new(3);
        acc.add_pair(0, 0, 1.0);
        acc.add_pair(2, 2, 1.0);
        let err = BandedCholesky::factor(&acc.into_csr()).unwrap_err();
        assert!(matches!(err, Error::Factorization { pivot: 1, .. }));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = tridiag(3, 2.0, 1.0);
        assert!(BandedCholesky::factor(&a).is_err());
    }

    #[test]
    fn pinned_rows_decouple() {
        let a = tridiag(4, -1.0, 2.0);
        let mut band = SymmetricBand::from_sparse(&a);
        band.pin(1);
        let chol = band.factor().unwrap();
        let x = chol.solve(&[1.0, 5.0, 1.0, 1.0]);
        assert!((x[1] - 5.0).abs() < 1e-15);
        // row 0 now reads 2 x0 = 1
        assert!((x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn accumulator_is_bitwise_symmetric() {
        let mut acc = SymmetricAccumulator::new(3);
        for k in 0..50 {
            let v = 0.1 * (k as f64).sin() + 1.0 / 3.0;
            acc.add_pair(0, 2, v);
            acc.add_pair(1, 2, v * 1e-7);
        }
        assert!(is_exactly_symmetric(&acc.into_csr()));
    }
}

//! Elliptic regularization εJ + B and the inner product it induces on X*:
//! (u, v)_* = ⟨(εJ + B)⁻¹u, v⟩.

use std::sync::Arc;

use crate::discretization::OperatorSet;
use crate::error::{Error, Result};
use crate::linalg::{self, BandedCholesky, SparseMatrix};

/// εJ + B together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct RegularizedOperator {
    eps: f64,
    ops: Arc<OperatorSet>,
    matrix: SparseMatrix,
    factor: BandedCholesky,
}

impl RegularizedOperator {
    /// Factor εJ + B. ε = 0 is accepted only when B itself is positive definite.
    pub fn new(ops: Arc<OperatorSet>, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::Argument(format!(
                "regularization parameter must be a finite nonnegative number, got {eps}"
            )));
        }
        let matrix = if eps == 0.0 {
            ops.weighted_mass.clone()
        } else {
            linalg::lin_comb(eps, &ops.riesz, 1.0, &ops.weighted_mass)
        };
        let factor = match BandedCholesky::factor(&matrix) {
            Ok(f) => f,
            Err(Error::Factorization {
                pivot,
                value,
                max_diag,
            }) if eps == 0.0 => {
                return Err(Error::Degenerate(format!(
                    "ε = 0 needs a positive definite B, but the factorization broke down at \
                     pivot {pivot} ({value:e} against largest diagonal {max_diag:e}); \
                     use a positive ε"
                )))
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            eps,
            ops,
            matrix,
            factor,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dof_count(&self) -> usize {
        self.matrix.rows()
    }

    /// (εJ + B) y
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        linalg::check_len(y, self.dof_count())?;
        Ok(linalg::matvec(&self.matrix, y))
    }

    /// (εJ + B)⁻¹ w, refined once when the first residual is not small.
    pub fn solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        linalg::check_len(w, self.dof_count())?;
        let mut x = self.factor.solve(w);
        let scale = linalg::norm2(w);
        if scale == 0.0 {
            return Ok(x);
        }
        let mut r = linalg::sub(w, &linalg::matvec(&self.matrix, &x));
        if linalg::norm2(&r) > 1e-12 * scale {
            self.factor.solve_in_place(&mut r);
            linalg::axpy(1.0, &r, &mut x);
            r = linalg::sub(w, &linalg::matvec(&self.matrix, &x));
        }
        let res = linalg::norm2(&r);
        if res > 1e-10 * scale {
            let (lo, hi) = self.factor.pivot_range();
            return Err(Error::NonConvergence {
                what: format!(
                    "solve with εJ + B (ε = {}, pivot range [{lo:e}, {hi:e}])",
                    self.eps
                ),
                iterations: 2,
                residual: res / scale,
                history: vec![],
            });
        }
        Ok(x)
    }

    /// (u, v)_* = ⟨(εJ + B)⁻¹u, v⟩
    pub fn inner_product_vstar(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        linalg::check_len(v, self.dof_count())?;
        Ok(linalg::dot(&self.solve(u)?, v))
    }

    /// |u|_*
    pub fn norm_vstar(&self, u: &[f64]) -> Result<f64> {
        Ok(self.inner_product_vstar(u, u)?.max(0.0).sqrt())
    }

    /// |(εJ + B) y|_* = sqrt(yᵀ(εJ + B)y), without a solve.
    pub fn energy_norm(&self, y: &[f64]) -> f64 {
        linalg::bilinear(&self.matrix, y, y).max(0.0).sqrt()
    }
}

/// Dual norm of X* = H^-1: ‖r‖_* = sqrt(rᵀJ⁻¹r).
#[derive(Debug, Clone)]
pub struct DualNorm {
    factor: BandedCholesky,
}

impl DualNorm {
    pub fn new(ops: &OperatorSet) -> Result<Self> {
        Ok(Self {
            factor: BandedCholesky::factor(&ops.riesz)?,
        })
    }

    pub fn norm(&self, r: &[f64]) -> f64 {
        linalg::dot(&self.factor.solve(r), r).max(0.0).sqrt()
    }

    /// Riesz representative J⁻¹r.
    pub fn riesz_representative(&self, r: &[f64]) -> Vec<f64> {
        self.factor.solve(r)
    }
}

//! Backward-Euler step for ((εJ + B)y)' + A(t, y) ∋ f(t).
//!
//! One step solves
//!
//! ```text
//! (εJ + B)(y − y_prev)/Δt + K_a(t) y + c(y_lag) + M_L w = f(t),   w_i ∈ ∂g(y_i)
//! ```
//!
//! with the convection covector c lagged (Picard) so that every inner
//! problem is symmetric positive definite plus a separable monotone term.
//! The inner problem is written in the prox variable z, y = prox(z),
//! w = (z − y)/λ, and solved by a semismooth Newton iteration whose linear
//! systems stay symmetric: nodes with zero prox slope are pinned.

use crate::error::{Error, Result};
use crate::linalg::{self, BandedCholesky, SparseMatrix, SymmetricBand};
use crate::operators::InclusionOperator;
use crate::regularization::RegularizedOperator;

/// Result of one implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    /// Unforced selection v ∈ A(t, y) implied by the step equation:
    /// v = f(t) − (εJ + B)(y − y_prev)/Δt.
    pub selection: Vec<f64>,
    /// Nodal subgradients w_i ∈ ∂g(y_i) from the inner solve.
    pub subgradient: Vec<f64>,
    pub picard_iterations: usize,
    pub newton_iterations: usize,
}

struct CachedFactor {
    time_key: Option<u64>,
    slopes: Vec<f64>,
    factor: BandedCholesky,
}

/// Reusable stepping context for a fixed (ε, Δt) pair.
pub struct Stepper<'a> {
    reg: &'a RegularizedOperator,
    op: &'a InclusionOperator,
    dt: f64,
    step_tol: f64,
    max_picard: usize,
    max_newton: usize,
    static_matrix: Option<SparseMatrix>,
    cache: Option<CachedFactor>,
    /// Prox variable of the last solve, used as the next starting point.
    z_warm: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        reg: &'a RegularizedOperator,
        op: &'a InclusionOperator,
        dt: f64,
        step_tol: f64,
        max_picard: usize,
        max_newton: usize,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("time step must be positive, got {dt}")));
        }
        if reg.dof_count() != op.dof_count() {
            return Err(Error::Dimension {
                expected: op.dof_count(),
                actual: reg.dof_count(),
            });
        }
        let static_matrix = if op.is_time_independent() {
            Some(linalg::lin_comb(
                1.0 / dt,
                reg.matrix(),
                1.0,
                op.stiffness(0.0)?.as_ref(),
            ))
        } else {
            None
        };
        Ok(Self {
            reg,
            op,
            dt,
            step_tol,
            max_picard,
            max_newton,
            static_matrix,
            cache: None,
            z_warm: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn reset_warm_start(&mut self) {
        self.z_warm = None;
    }

    fn system_matrix(&self, t: f64) -> Result<std::borrow::Cow<'_, SparseMatrix>> {
        match &self.static_matrix {
            Some(m) => Ok(std::borrow::Cow::Borrowed(m)),
            None => Ok(std::borrow::Cow::Owned(linalg::lin_comb(
                1.0 / self.dt,
                self.reg.matrix(),
                1.0,
                self.op.stiffness(t)?.as_ref(),
            ))),
        }
    }

    /// Advance from `y_prev` at time t − Δt to time t.
    pub fn step(&mut self, t: f64, y_prev: &[f64]) -> Result<StepOutcome> {
        linalg::check_len(y_prev, self.op.dof_count())?;
        let matrix = self.system_matrix(t)?.into_owned();
        let time_key = if self.static_matrix.is_some() {
            None
        } else {
            Some(t.to_bits())
        };
        let mut base_rhs = linalg::scale(1.0 / self.dt, &self.reg.apply(y_prev)?);
        let forcing = self.op.forcing(t);
        linalg::axpy(1.0, &forcing, &mut base_rhs);

        let mut z = match &self.z_warm {
            Some(z) => z.clone(),
            None => y_prev.to_vec(),
        };
        let mut lagged = y_prev.to_vec();
        let mut newton_total = 0;
        let mut picard = 0;
        let (state, subgradient) = loop {
            picard += 1;
            let rhs = if self.op.convection() {
                linalg::sub(&base_rhs, &self.op.convection_covector(&lagged))
            } else {
                base_rhs.clone()
            };
            let inner = self.solve_monotone(&matrix, time_key, &rhs, &mut z)?;
            newton_total += inner.iterations;
            if !self.op.convection() {
                break (inner.state, inner.subgradient);
            }
            let change = self.reg.energy_norm(&linalg::sub(&inner.state, &lagged));
            let size = self.reg.energy_norm(&inner.state);
            if change <= self.step_tol * (1.0 + size) {
                break (inner.state, inner.subgradient);
            }
            if picard >= self.max_picard {
                return Err(Error::NonConvergence {
                    what: format!(
                        "Picard iteration for the lagged convection at t = {t} \
                         (time step {} may be too large for the convection strength)",
                        self.dt
                    ),
                    iterations: picard,
                    residual: change,
                    history: vec![],
                });
            }
            lagged = inner.state;
        };
        self.z_warm = Some(z);

        let mut selection = forcing;
        let du = self.reg.apply(&linalg::sub(&state, y_prev))?;
        linalg::axpy(-1.0 / self.dt, &du, &mut selection);
        Ok(StepOutcome {
            state,
            selection,
            subgradient,
            picard_iterations: picard,
            newton_iterations: newton_total,
        })
    }

    /// Solve K y + M_L w = rhs, w_i ∈ ∂g(y_i), starting from the prox
    /// variable `z` (updated in place).
    fn solve_monotone(
        &mut self,
        matrix: &SparseMatrix,
        time_key: Option<u64>,
        rhs: &[f64],
        z: &mut Vec<f64>,
    ) -> Result<InnerSolution> {
        let g = self.op.g();
        let lumped = &self.op.ops().lumped_mass;
        let n = rhs.len();
        let diag = linalg::diagonal(matrix);
        // λ_i = ℓ_i / K_ii balances the two terms of Φ
        let lambda: Vec<f64> = lumped.iter().zip(&diag).map(|(l, d)| l / d).collect();
        let big_lambda = &diag;

        let eval = |z: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let y: Vec<f64> = z
                .iter()
                .zip(&lambda)
                .map(|(&zi, &li)| g.prox_unchecked(li, zi))
                .collect();
            let mut phi = linalg::matvec(matrix, &y);
            for i in 0..n {
                phi[i] += big_lambda[i] * (z[i] - y[i]) - rhs[i];
            }
            (y, phi)
        };

        let scale = 1.0 + linalg::norm_inf(rhs);
        let tol = 1e-13 * scale;
        let (mut y, mut phi) = eval(z);
        let mut res = linalg::norm_inf(&phi);
        let mut history = vec![res];
        let mut iterations = 0;
        while res > tol {
            if iterations >= self.max_newton {
                return Err(Error::NonConvergence {
                    what: "semismooth Newton solve of the nodal prox subproblem".into(),
                    iterations,
                    residual: res,
                    history,
                });
            }
            iterations += 1;
            let slopes: Vec<f64> = z
                .iter()
                .zip(&lambda)
                .map(|(&zi, &li)| g.prox_slope(li, zi))
                .collect();
            let factor = self.factor_for(matrix, time_key, &slopes, big_lambda)?;
            let mut dy: Vec<f64> = (0..n)
                .map(|i| if slopes[i] > 0.0 { -phi[i] } else { 0.0 })
                .collect();
            factor.solve_in_place(&mut dy);
            let kdy = linalg::matvec(matrix, &dy);
            let dz: Vec<f64> = (0..n)
                .map(|i| {
                    if slopes[i] > 0.0 {
                        dy[i] / slopes[i]
                    } else {
                        (-phi[i] - kdy[i]) / big_lambda[i]
                    }
                })
                .collect();
            // backtracking on the residual; semismooth steps are accepted whole
            // in the piecewise-linear case
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
                let (ty, tphi) = eval(&trial);
                let tres = linalg::norm_inf(&tphi);
                if tres <= (1.0 - 1e-4 * step) * res || tres <= tol {
                    accepted = Some((trial, ty, tphi, tres));
                    break;
                }
                step *= 0.5;
            }
            let (nz, ny, nphi, nres) = match accepted {
                Some(a) => a,
                None => {
                    let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
                    let (ty, tphi) = eval(&trial);
                    let tres = linalg::norm_inf(&tphi);
                    (trial, ty, tphi, tres)
                }
            };
            *z = nz;
            y = ny;
            phi = nphi;
            res = nres;
            history.push(res);
        }
        let subgradient = (0..n).map(|i| (z[i] - y[i]) / lambda[i]).collect();
        Ok(InnerSolution {
            state: y,
            subgradient,
            iterations,
        })
    }

    fn factor_for(
        &mut self,
        matrix: &SparseMatrix,
        time_key: Option<u64>,
        slopes: &[f64],
        big_lambda: &[f64],
    ) -> Result<&BandedCholesky> {
        let reuse = matches!(&self.cache, Some(c) if c.time_key == time_key && c.slopes == slopes);
        if !reuse {
            let mut band = SymmetricBand::from_sparse(matrix);
            for (i, &d) in slopes.iter().enumerate() {
                if d > 0.0 {
                    if d < 1.0 {
                        band.add_diagonal(i, big_lambda[i] * (1.0 - d) / d);
                    }
                } else {
                    band.pin(i);
                }
            }
            self.cache = Some(CachedFactor {
                time_key,
                slopes: slopes.to_vec(),
                factor: band.factor()?,
            });
        }
        Ok(&self.cache.as_ref().expect("factor cached above").factor)
    }
}

struct InnerSolution {
    state: Vec<f64>,
    subgradient: Vec<f64>,
    iterations: usize,
}

/// Single implicit step with default inner-iteration limits.
pub fn implicit_step(
    reg: &RegularizedOperator,
    op: &InclusionOperator,
    t: f64,
    y_prev: &[f64],
    dt: f64,
    step_tol: f64,
) -> Result<StepOutcome> {
    Stepper::new(reg, op, dt, step_tol, 50, 50)?.step(t, y_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ConvexTerm;
    use crate::discretization::{OperatorSet, SpatialDiscretization, Weight};
    use crate::operators::{Diffusion, Forcing, FourierMode, OperatorData, Temporal};
    use std::sync::Arc;

    fn build(
        cells: usize,
        m: Weight,
        g: ConvexTerm,
        convection: bool,
        forcing: Forcing,
    ) -> (Arc<OperatorSet>, InclusionOperator) {
        let mesh = Arc::new(SpatialDiscretization::build(1, &[1.0], &[cells]).unwrap());
        let ops = Arc::new(OperatorSet::assemble(&mesh, &m).unwrap());
        let op = InclusionOperator::new(
            mesh,
            ops.clone(),
            OperatorData {
                diffusion: Diffusion::Constant(1.0),
                a0: 1.0,
                convection,
                g,
                forcing,
                horizon: 1.0,
            },
        )
        .unwrap();
        (ops, op)
    }

    fn sine_forcing() -> Forcing {
        Forcing::Fourier(vec![FourierMode {
            amplitude: 1.0,
            wavenumbers: vec![1],
            temporal: Temporal::Sin,
            frequency: 1.0,
        }])
    }

    #[test]
    fn trivial_equilibrium() {
        let (ops, op) = build(6, Weight::Constant(1.0), ConvexTerm::Zero, false, Forcing::Zero);
        let reg = RegularizedOperator::new(ops, 0.1).unwrap();
        let out = implicit_step(&reg, &op, 0.1, &[0.0; 5], 0.1, 1e-12).unwrap();
        assert!(out.state.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_step_matches_dense_oracle() {
        // m ≡ 1, ε = 0: (M/Δt + J) y = M y_prev/Δt + f(t)
        let (ops, op) = build(4, Weight::Constant(1.0), ConvexTerm::Zero, false, sine_forcing());
        let reg = RegularizedOperator::new(ops.clone(), 0.0).unwrap();
        let dt = 0.05;
        let t = 0.3;
        let y_prev = [0.2, -0.1, 0.4];
        let out = implicit_step(&reg, &op, t, &y_prev, dt, 1e-12).unwrap();

        let m = linalg::to_dense(&ops.mass);
        let j = linalg::to_dense(&ops.riesz);
        let lhs = &m / dt + &j;
        let yp = nalgebra::DVector::from_row_slice(&y_prev);
        let f = nalgebra::DVector::from_vec(op.forcing(t));
        let rhs = &m * yp / dt + f;
        let oracle = lhs.lu().solve(&rhs).unwrap();
        for i in 0..3 {
            assert!((out.state[i] - oracle[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_abs_step_is_soft_threshold() {
        // 1 dof: K y + ℓ w = c with w ∈ ∂|y|  ⇒  y = soft(c/K, ℓ/K)
        let (ops, op) = build(2, Weight::Constant(1.0), ConvexTerm::Abs, false, sine_forcing());
        let reg = RegularizedOperator::new(ops.clone(), 0.0).unwrap();
        let dt = 0.1;
        let b = ops.weighted_mass.get(0, 0).copied().unwrap();
        let j = ops.riesz.get(0, 0).copied().unwrap();
        let l = ops.lumped_mass[0];
        for &(t, y_prev) in &[(0.25, 0.0), (0.25, 3.0), (0.75, -2.0), (0.5, 0.01)] {
            let out = implicit_step(&reg, &op, t, &[y_prev], dt, 1e-12).unwrap();
            let k = b / dt + j;
            let c = b * y_prev / dt + op.forcing(t)[0];
            let x = c / k;
            let tau = l / k;
            let expected = if x > tau {
                x - tau
            } else if x < -tau {
                x + tau
            } else {
                0.0
            };
            assert!((out.state[0] - expected).abs() < 1e-12, "{} vs {expected}", out.state[0]);
        }
    }

    #[test]
    fn implied_selection_is_in_the_set() {
        let m = Weight::Indicator {
            axis: 0,
            lower: 0.0,
            upper: 0.5,
            inside: 1.0,
            outside: 0.0,
        };
        for g in ConvexTerm::catalog() {
            let (ops, op) = build(16, m.clone(), g, false, sine_forcing());
            let reg = RegularizedOperator::new(ops, 0.1).unwrap();
            let y_prev: Vec<f64> = (0..15).map(|i| 0.3 * ((i as f64) * 0.7).sin()).collect();
            let out = implicit_step(&reg, &op, 0.25, &y_prev, 0.02, 1e-12).unwrap();
            let f = op.forcing(0.25);
            let forced = linalg::sub(&out.selection, &f);
            let r = op.membership_residual(0.25, &out.state, &forced).unwrap();
            assert!(r.max < 1e-9, "{}: {}", g.name(), r.max);
        }
    }

    #[test]
    fn convection_step_converges_by_picard() {
        let (ops, op) = build(20, Weight::Constant(1.0), ConvexTerm::Abs, true, sine_forcing());
        let reg = RegularizedOperator::new(ops, 0.05).unwrap();
        let y_prev: Vec<f64> = (0..19).map(|i| ((i as f64) * 0.3).cos()).collect();
        let out = implicit_step(&reg, &op, 0.25, &y_prev, 0.01, 1e-12).unwrap();
        assert!(out.picard_iterations > 1);
        let f = op.forcing(0.25);
        let r = op
            .membership_residual(0.25, &out.state, &linalg::sub(&out.selection, &f))
            .unwrap();
        assert!(r.max < 1e-8, "{}", r.max);
    }

    #[test]
    fn picard_failure_is_reported() {
        let (ops, op) = build(20, Weight::Constant(1.0), ConvexTerm::Zero, true, Forcing::Zero);
        let reg = RegularizedOperator::new(ops, 0.05).unwrap();
        let y_prev: Vec<f64> = (0..19).map(|i| 5.0 * ((i as f64) * 0.9).sin()).collect();
        let mut stepper = Stepper::new(&reg, &op, 0.01, 1e-15, 2, 50).unwrap();
        let err = stepper.step(0.1, &y_prev).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
    }
}

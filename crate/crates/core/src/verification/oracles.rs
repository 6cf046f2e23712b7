//! Reference solutions independent of the shooting solver.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::discretization::SpatialDiscretization;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{FourierMode, InclusionOperator, Temporal};
use crate::periodic_solver::{time_grid, Trajectory};
use crate::regularization::RegularizedOperator;

/// Periodic solution of μ c' + κ c = A·T(ωt) for T = sin or cos.
pub fn periodic_mode(mu: f64, kappa: f64, amplitude: f64, omega: f64, temporal: Temporal, t: f64) -> f64 {
    let lam = kappa / mu;
    let a = amplitude / mu;
    let d = lam * lam + omega * omega;
    let (s, c) = (omega * t).sin_cos();
    match temporal {
        Temporal::Sin => a * (lam * s - omega * c) / d,
        Temporal::Cos => a * (lam * c + omega * s) / d,
    }
}

/// Exact periodic solution of ((ε(−Δ) + m)y)' − aΔy = f for constant m, a
/// and Fourier-mode forcing on a box with Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct FourierOracle {
    modes: Vec<FourierMode>,
    extents: Vec<f64>,
    diffusion: f64,
    weight: f64,
    eps: f64,
    horizon: f64,
}

impl FourierOracle {
    pub fn new(
        modes: Vec<FourierMode>,
        extents: &[f64],
        diffusion: f64,
        weight: f64,
        eps: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(diffusion > 0.0) || weight < 0.0 || eps < 0.0 || !(weight + eps > 0.0) {
            return Err(Error::Argument(
                "Fourier oracle needs a > 0, m ≥ 0, ε ≥ 0 and m + ε > 0".into(),
            ));
        }
        Ok(Self {
            modes,
            extents: extents.to_vec(),
            diffusion,
            weight,
            eps,
            horizon,
        })
    }

    pub fn value(&self, t: f64, z: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let lam: f64 = m
                    .wavenumbers
                    .iter()
                    .zip(&self.extents)
                    .map(|(&k, &l)| (k as f64 * PI / l).powi(2))
                    .sum();
                let omega = 2.0 * PI * m.frequency / self.horizon;
                let c = periodic_mode(
                    self.eps * lam + self.weight,
                    self.diffusion * lam,
                    m.amplitude,
                    omega,
                    m.temporal,
                    t,
                );
                c * m.spatial(z, &self.extents)
            })
            .sum()
    }
}

/// Errors of a trajectory against a closed-form field: (largest nodal
/// error, space-time L² error with the right-endpoint rule in time).
pub fn manufactured_error(
    traj: &Trajectory,
    mesh: &SpatialDiscretization,
    mass: &linalg::SparseMatrix,
    exact: impl Fn(f64, &[f64]) -> f64,
) -> (f64, f64) {
    let dt = traj.dt();
    let mut max = 0.0_f64;
    let mut l2 = 0.0;
    for (k, y) in traj.states.iter().enumerate() {
        let t = traj.times[k];
        let e: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, v)| v - exact(t, mesh.dof_coordinates(i)))
            .collect();
        max = max.max(linalg::norm_inf(&e));
        if k > 0 {
            l2 += dt * linalg::bilinear(mass, &e, &e);
        }
    }
    (max, l2.max(0.0).sqrt())
}

/// Settings of the stacked dense oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 1_000_000,
        }
    }
}

/// Periodic solution of the time-discrete inclusion on a tiny mesh, found
/// without shooting: all K backward-Euler steps with the periodic wrap form
/// one monotone inclusion 0 ∈ L(Y) − F + N(Y) in K·n unknowns, solved by
/// Douglas–Rachford splitting with dense resolvents of L and nodal prox
/// resolvents of N.
pub fn oracle_tiny_periodic(
    reg: &RegularizedOperator,
    op: &InclusionOperator,
    steps: usize,
    settings: OracleSettings,
) -> Result<Trajectory> {
    let n = op.dof_count();
    if n > 3 {
        return Err(Error::Argument(format!("oracle supports at most 3 dofs, got {n}")));
    }
    if !(2..=10_000).contains(&steps) {
        return Err(Error::Argument(format!("oracle needs 2 ≤ K ≤ 10⁴, got {steps}")));
    }
    if op.convection() {
        return Err(Error::Argument("oracle does not treat convection".into()));
    }
    let big = n * steps;
    let times = time_grid(op.horizon(), steps);
    let dt = op.horizon() / steps as f64;
    let e = linalg::to_dense(reg.matrix()) / dt;
    let mut l = DMatrix::<f64>::zeros(big, big);
    let mut f = DVector::<f64>::zeros(big);
    // block k holds y_{k+1}; y_0 = y_K
    for k in 0..steps {
        let a = linalg::to_dense(op.stiffness(times[k + 1])?.as_ref());
        let prev = (k + steps - 1) % steps;
        for i in 0..n {
            for j in 0..n {
                l[(k * n + i, k * n + j)] += e[(i, j)] + a[(i, j)];
                l[(k * n + i, prev * n + j)] -= e[(i, j)];
            }
        }
        let fk = op.forcing(times[k + 1]);
        for i in 0..n {
            f[k * n + i] = fk[i];
        }
    }
    let sv = l.clone().svd(false, false).singular_values;
    let gamma = 1.0 / (sv.max() * sv.min()).sqrt();
    let resolvent = (DMatrix::identity(big, big) + &l * gamma).lu();
    let lumped: Vec<f64> = (0..big).map(|r| op.ops().lumped_mass[r % n]).collect();
    let g = op.g();
    let prox = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(
            big,
            x.iter().enumerate().map(|(r, &v)| g.prox_unchecked(gamma * lumped[r], v)),
        )
    };
    let scale = 1.0 + f.amax();
    let mut x = DVector::<f64>::zeros(big);
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        iterations += 1;
        let y = prox(&x);
        let rhs = &y * 2.0 - &x + &f * gamma;
        let z = resolvent
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("stacked periodic operator is singular".into()))?;
        let d = &z - &y;
        change = d.amax();
        x += d;
        if change <= settings.tolerance * 1e-3 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            what: "Douglas–Rachford iteration of the stacked periodic oracle".into(),
            iterations,
            residual: change,
            history: vec![],
        });
    }
    let y = prox(&x);
    let mut states = Vec::with_capacity(steps + 1);
    let block = |k: usize| (0..n).map(|i| y[k * n + i]).collect::<Vec<f64>>();
    states.push(block(steps - 1));
    for k in 0..steps {
        states.push(block(k));
    }
    let mut selections = vec![Vec::new(); steps + 1];
    for k in 1..=steps {
        let mut v = op.forcing(times[k]);
        let du = reg.apply(&linalg::sub(&states[k], &states[k - 1]))?;
        linalg::axpy(-1.0 / dt, &du, &mut v);
        selections[k] = v;
    }
    selections[0] = selections[steps].clone();
    Ok(Trajectory {
        eps: reg.eps(),
        times,
        states,
        selections,
    })
}

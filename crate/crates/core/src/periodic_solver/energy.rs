//! Energy identity and a-priori bound diagnostics of a periodic trajectory.

use super::Trajectory;
use crate::error::Result;
use crate::linalg;
use crate::operators::InclusionOperator;
use crate::regularization::{DualNorm, RegularizedOperator};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyDiagnostics {
    /// Σ_k Δt (v_k − f_k, u_k)_*, at most ½(|u_0|²_* − |u_K|²_*).
    pub defect: f64,
    /// Tolerance scale from the periodicity residual plus a rounding floor.
    pub tau: f64,
    /// τ_energy (1 + Σ_k Δt |u_k|_*), the admissible size of `defect`.
    pub slack: f64,
    /// c₃ Σ_k Δt ‖y_k‖^p
    pub apriori_lhs: f64,
    /// ‖c₄‖_{L¹} + Σ_k Δt ⟨f_k, y_k⟩ + slack
    pub apriori_rhs: f64,
    /// apriori_rhs − apriori_lhs
    pub margin: f64,
}

impl EnergyDiagnostics {
    pub fn compute(
        traj: &Trajectory,
        reg: &RegularizedOperator,
        op: &InclusionOperator,
        p: f64,
    ) -> Result<Self> {
        let dt = traj.dt();
        let k_max = traj.steps();
        let c = op.constants();
        let mut defect = 0.0;
        let mut magnitude = 0.0;
        let mut u_sum = 0.0;
        let mut lhs = 0.0;
        let mut forcing = 0.0;
        for k in 1..=k_max {
            let y = &traj.states[k];
            let f = op.forcing(traj.times[k]);
            // (v − f, u)_* = ⟨v − f, y⟩ since u = (εJ + B)y
            let term = linalg::dot(&linalg::sub(&traj.selections[k], &f), y);
            defect += dt * term;
            magnitude += dt * term.abs();
            u_sum += dt * reg.energy_norm(y);
            lhs += dt * op.ops().norm_x(y).powf(p);
            forcing += dt * linalg::dot(&f, y);
        }
        let r = traj.periodicity_residual(reg);
        let u0 = reg.energy_norm(traj.initial());
        let uk = reg.energy_norm(traj.last());
        let tau = 0.5 * r * (u0 + uk) + 1e-12 * (1.0 + magnitude);
        let slack = tau * (1.0 + u_sum);
        let apriori_lhs = c.c3 * lhs;
        let apriori_rhs = c.c4 * op.horizon() + forcing + slack;
        Ok(Self {
            defect,
            tau,
            slack,
            apriori_lhs,
            apriori_rhs,
            margin: apriori_rhs - apriori_lhs,
        })
    }

    pub fn identity_holds(&self) -> bool {
        self.defect <= self.slack
    }

    pub fn margin_holds(&self) -> bool {
        self.margin >= -10.0 * self.tau
    }
}

/// Largest s with c₃ s^p ≤ ‖c₄‖_{L¹} + F s, where F is the discrete
/// L^{p'}(T, X*) norm of the forcing; `None` when c₃ ≤ 0.
pub fn predicted_bound(op: &InclusionOperator, steps: usize, p: f64) -> Result<Option<f64>> {
    let c = op.constants();
    if !(c.c3 > 0.0) {
        return Ok(None);
    }
    let q = p / (p - 1.0);
    let dual = DualNorm::new(op.ops())?;
    let dt = op.horizon() / steps as f64;
    let f_norm = (1..=steps)
        .map(|k| dt * dual.norm(&op.forcing(k as f64 * dt)).powf(q))
        .sum::<f64>()
        .powf(1.0 / q);
    let c4 = c.c4 * op.horizon();
    let excess = |s: f64| c.c3 * s.powf(p) - c4 - f_norm * s;
    let mut hi = 1.0;
    while excess(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

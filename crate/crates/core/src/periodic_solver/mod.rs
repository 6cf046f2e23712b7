//! Time-periodic solves of ((εJ + B)y)' + A(t, y) ∋ f by backward Euler,
//! Poincaré-map shooting and ε-continuation.

mod anderson;
mod energy;
mod step;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::InclusionOperator;
use crate::regularization::RegularizedOperator;

pub use anderson::{Acceleration, Mixer};
pub use energy::{predicted_bound, EnergyDiagnostics};
pub use step::{implicit_step, StepOutcome, Stepper};

/// Numerical controls for stepping, shooting and continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub steps: usize,
    pub epsilons: Vec<f64>,
    pub step_tol: f64,
    pub periodic_tol: f64,
    pub max_poincare: usize,
    pub acceleration: Acceleration,
    pub continuation_tol: f64,
    pub p: f64,
    pub max_picard: usize,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            epsilons: harmonic_schedule(32),
            step_tol: 1e-12,
            periodic_tol: 1e-10,
            max_poincare: 200,
            acceleration: Acceleration::default(),
            continuation_tol: 1e-6,
            p: 2.0,
            max_picard: 50,
            max_newton: 50,
        }
    }
}

/// ε_n = 1/n for n = 1..=n_max.
pub fn harmonic_schedule(n_max: usize) -> Vec<f64> {
    (1..=n_max).map(|n| 1.0 / n as f64).collect()
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::config(format!("steps must be at least 2, got {}", self.steps)));
        }
        for (name, v) in [
            ("step_tol", self.step_tol),
            ("periodic_tol", self.periodic_tol),
            ("continuation_tol", self.continuation_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.p > 1.0) {
            return Err(Error::config(format!("p must exceed 1, got {}", self.p)));
        }
        if self.max_poincare == 0 || self.max_picard == 0 || self.max_newton == 0 {
            return Err(Error::config("iteration limits must be positive"));
        }
        match self.acceleration {
            Acceleration::Relaxed(theta) if !(theta > 0.0 && theta <= 1.0) => {
                return Err(Error::config(format!("relaxation must lie in (0, 1], got {theta}")))
            }
            _ => {}
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::config(format!("epsilon[{i}] must be positive, got {e}")));
            }
            if i > 0 && !(e < self.epsilons[i - 1]) {
                return Err(Error::config(format!(
                    "epsilon schedule must be strictly decreasing at position {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Discrete trajectory on t_k = kΔt, k = 0..K.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub eps: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Unforced selections v_k ∈ A(t_k, y_k); v_0 repeats v_K.
    pub selections: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn zero(eps: f64, horizon: f64, steps: usize, dofs: usize) -> Self {
        Self {
            eps,
            times: time_grid(horizon, steps),
            states: vec![vec![0.0; dofs]; steps + 1],
            selections: vec![vec![0.0; dofs]; steps + 1],
        }
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.states[self.steps()]
    }

    /// u_k = (εJ + B) y_k
    pub fn u(&self, reg: &RegularizedOperator, k: usize) -> Result<Vec<f64>> {
        reg.apply(&self.states[k])
    }

    /// (Σ_{k≥1} Δt‖y_k‖^p)^{1/p}
    pub fn lp_norm_x(&self, op: &InclusionOperator, p: f64) -> f64 {
        let dt = self.dt();
        let s: f64 = self.states[1..]
            .iter()
            .map(|y| dt * op.ops().norm_x(y).powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    /// (Σ_{k≥1} Δt|u_k|_*^p)^{1/p}
    pub fn lp_norm_vstar(&self, reg: &RegularizedOperator, p: f64) -> f64 {
        let dt = self.dt();
        let s: f64 = self.states[1..]
            .iter()
            .map(|y| dt * reg.energy_norm(y).powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    /// ‖y − ŷ‖_{L^p(T,X)} for trajectories on the same grid.
    pub fn distance_lp_x(&self, other: &Trajectory, op: &InclusionOperator, p: f64) -> Result<f64> {
        if other.times.len() != self.times.len() {
            return Err(Error::Dimension {
                expected: self.times.len(),
                actual: other.times.len(),
            });
        }
        let dt = self.dt();
        let s: f64 = self.states[1..]
            .iter()
            .zip(&other.states[1..])
            .map(|(a, b)| dt * op.ops().norm_x(&linalg::sub(a, b)).powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    /// |u_K − u_0|_*
    pub fn periodicity_residual(&self, reg: &RegularizedOperator) -> f64 {
        reg.energy_norm(&linalg::sub(self.last(), self.initial()))
    }

    /// |B y_0 − B y_K|_* in the inner product of `reg`.
    pub fn boundary_residual(&self, reg: &RegularizedOperator) -> Result<f64> {
        let d = linalg::sub(self.initial(), self.last());
        reg.norm_vstar(&linalg::matvec(&reg.ops().weighted_mass, &d))
    }

    /// Largest ‖(u_k − u_{k−1})/Δt + v_k − f(t_k)‖_* over k ≥ 1.
    pub fn stepping_residual(
        &self,
        reg: &RegularizedOperator,
        op: &InclusionOperator,
        dual: &crate::regularization::DualNorm,
    ) -> Result<f64> {
        let dt = self.dt();
        let mut worst = 0.0_f64;
        for k in 1..=self.steps() {
            let mut r = reg.apply(&linalg::sub(&self.states[k], &self.states[k - 1]))?;
            for v in r.iter_mut() {
                *v /= dt;
            }
            linalg::axpy(1.0, &self.selections[k], &mut r);
            linalg::axpy(-1.0, &op.forcing(self.times[k]), &mut r);
            worst = worst.max(dual.norm(&r));
        }
        Ok(worst)
    }

    /// Nodal membership residuals of (y_k, v_k) for k ≥ 1: (largest max, largest L^{p'} norm).
    pub fn membership(&self, op: &InclusionOperator) -> Result<(f64, f64)> {
        let mut max = 0.0_f64;
        let mut norm = 0.0_f64;
        for k in 1..=self.steps() {
            let t = self.times[k];
            let w = linalg::sub(&self.selections[k], &op.forcing(t));
            let m = op.membership_residual(t, &self.states[k], &w)?;
            max = max.max(m.max);
            norm = norm.max(m.norm);
        }
        Ok((max, norm))
    }
}

pub fn time_grid(horizon: f64, steps: usize) -> Vec<f64> {
    let dt = horizon / steps as f64;
    (0..=steps)
        .map(|k| if k == steps { horizon } else { k as f64 * dt })
        .collect()
}

fn new_stepper<'a>(
    reg: &'a RegularizedOperator,
    op: &'a InclusionOperator,
    config: &SolverConfig,
) -> Result<Stepper<'a>> {
    Stepper::new(
        reg,
        op,
        op.horizon() / config.steps as f64,
        config.step_tol,
        config.max_picard,
        config.max_newton,
    )
}

fn integrate(stepper: &mut Stepper<'_>, config: &SolverConfig, horizon: f64, eps: f64, y0: &[f64]) -> Result<Trajectory> {
    let times = time_grid(horizon, config.steps);
    let mut states = Vec::with_capacity(config.steps + 1);
    let mut selections = Vec::with_capacity(config.steps + 1);
    states.push(y0.to_vec());
    selections.push(Vec::new());
    for k in 1..=config.steps {
        let out = stepper.step(times[k], &states[k - 1]).map_err(|e| match e {
            Error::NonConvergence {
                what,
                iterations,
                residual,
                history,
            } => Error::NonConvergence {
                what: format!("{what} (time step {k})"),
                iterations,
                residual,
                history,
            },
            other => other,
        })?;
        states.push(out.state);
        selections.push(out.selection);
    }
    selections[0] = selections[config.steps].clone();
    Ok(Trajectory {
        eps,
        times,
        states,
        selections,
    })
}

/// Integrate one period from `y0`; the Poincaré image is the last state.
pub fn poincare_map(
    reg: &RegularizedOperator,
    op: &InclusionOperator,
    config: &SolverConfig,
    y0: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    linalg::check_len(y0, op.dof_count())?;
    let mut stepper = new_stepper(reg, op, config)?;
    integrate(&mut stepper, config, op.horizon(), reg.eps(), y0)
}

/// Converged periodic trajectory with its shooting history.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub trajectory: Trajectory,
    /// Number of Poincaré map evaluations.
    pub iterations: usize,
    /// |u_K − u_0|_* after each evaluation.
    pub residual_history: Vec<f64>,
}

/// Fixed point of the Poincaré map, |u_K − u_0|_* ≤ τ_per.
///
/// `initial` defaults to the zero state. Works for any regularization,
/// including ε = 0 when B is positive definite.
pub fn solve_periodic_eps(
    reg: &RegularizedOperator,
    op: &InclusionOperator,
    config: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<PeriodicSolution> {
    config.validate()?;
    let n = op.dof_count();
    let mut x = match initial {
        Some(y) => {
            linalg::check_len(y, n)?;
            y.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut stepper = new_stepper(reg, op, config)?;
    let mut mixer = Mixer::new(config.acceleration);
    let mut history = Vec::new();
    for it in 1..=config.max_poincare {
        let traj = integrate(&mut stepper, config, op.horizon(), reg.eps(), &x)?;
        let r = traj.periodicity_residual(reg);
        history.push(r);
        if !r.is_finite() {
            break;
        }
        if r <= config.periodic_tol {
            return Ok(PeriodicSolution {
                trajectory: traj,
                iterations: it,
                residual_history: history,
            });
        }
        x = mixer.next(&x, traj.last());
    }
    Err(Error::NonConvergence {
        what: format!("Poincaré fixed point at ε = {}", reg.eps()),
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Periodic solve of the unregularized problem, valid when B is positive definite.
pub fn solve_direct(op: &InclusionOperator, config: &SolverConfig) -> Result<PeriodicSolution> {
    let reg = RegularizedOperator::new(op.ops_arc(), 0.0)?;
    solve_periodic_eps(&reg, op, config, None)
}

/// One row of the continuation table.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub n: usize,
    pub eps: f64,
    /// ‖y^(n) − y^(n−1)‖_{L^p(T,X)}; the first stage compares with zero.
    pub distance: f64,
    pub periodicity_residual: f64,
    pub boundary_residual: f64,
    pub inclusion_residual: f64,
    pub inclusion_residual_lp: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub residual_history: Vec<f64>,
    pub norm_lp_x: f64,
    pub norm_lp_vstar: f64,
    pub energy: EnergyDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<StageRecord>,
}

impl ConvergenceTable {
    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.distance).collect()
    }

    /// Whether the last `count` distances are nonincreasing.
    pub fn tail_nonincreasing(&self, count: usize) -> bool {
        let d = self.distances();
        if d.len() < count {
            return false;
        }
        d[d.len() - count..].windows(2).all(|w| w[1] <= w[0])
    }
}

/// Result of a continuation run.
#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    pub trajectory: Trajectory,
    pub table: ConvergenceTable,
    /// Converged trajectory of every stage, in schedule order.
    pub stages: Vec<Trajectory>,
    /// Whether the run stopped on d_n ≤ τ_cont before the schedule ran out.
    pub stopped_early: bool,
}

/// A stage failed; the table holds every completed stage.
#[derive(Debug)]
pub struct ContinuationFailure {
    pub stage: usize,
    pub eps: f64,
    pub error: Error,
    pub table: ConvergenceTable,
    pub stages: Vec<Trajectory>,
}

impl std::fmt::Display for ContinuationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {} (ε = {}) failed: {}", self.stage, self.eps, self.error)
    }
}

impl std::error::Error for ContinuationFailure {}

/// Stage callback for progress reporting.
pub type StageObserver<'a> = &'a mut dyn FnMut(&StageRecord, &Trajectory);

/// Diagnostics of a converged stage; `reference` is the previous stage.
pub fn measure_stage(
    n: usize,
    sol: &PeriodicSolution,
    reference: &Trajectory,
    reg: &RegularizedOperator,
    op: &InclusionOperator,
    p: f64,
) -> Result<StageRecord> {
    let traj = &sol.trajectory;
    let (inclusion_residual, inclusion_residual_lp) = traj.membership(op)?;
    Ok(StageRecord {
        n,
        eps: reg.eps(),
        distance: traj.distance_lp_x(reference, op, p)?,
        periodicity_residual: traj.periodicity_residual(reg),
        boundary_residual: traj.boundary_residual(reg)?,
        inclusion_residual,
        inclusion_residual_lp,
        iterations: sol.iterations,
        seconds: 0.0,
        residual_history: sol.residual_history.clone(),
        norm_lp_x: traj.lp_norm_x(op, p),
        norm_lp_vstar: traj.lp_norm_vstar(reg, p),
        energy: EnergyDiagnostics::compute(traj, reg, op, p)?,
    })
}

/// Solve along the ε schedule, warm-starting each stage from the previous y.
pub fn continuation_solve(
    op: &InclusionOperator,
    config: &SolverConfig,
    mut observer: Option<StageObserver<'_>>,
) -> std::result::Result<ContinuationOutcome, ContinuationFailure> {
    let fail = |stage: usize, eps: f64, error: Error, table: &ConvergenceTable, stages: &[Trajectory]| {
        ContinuationFailure {
            stage,
            eps,
            error,
            table: table.clone(),
            stages: stages.to_vec(),
        }
    };
    let mut table = ConvergenceTable::default();
    let mut stages: Vec<Trajectory> = Vec::new();
    if let Err(e) = config.validate() {
        return Err(fail(0, f64::NAN, e, &table, &stages));
    }
    if config.epsilons.is_empty() {
        return Err(fail(0, f64::NAN, Error::config("epsilon schedule is empty"), &table, &stages));
    }
    let p = config.p;
    let n_dofs = op.dof_count();
    let mut stopped_early = false;
    for (idx, &eps) in config.epsilons.iter().enumerate() {
        let n = idx + 1;
        let start = Instant::now();
        let stage = (|| -> Result<(PeriodicSolution, StageRecord)> {
            let reg = RegularizedOperator::new(op.ops_arc(), eps)?;
            let warm = stages.last().map(|t| t.initial().to_vec());
            let sol = solve_periodic_eps(&reg, op, config, warm.as_deref())?;
            let reference = match stages.last() {
                Some(prev) => prev.clone(),
                None => Trajectory::zero(eps, op.horizon(), config.steps, n_dofs),
            };
            let record = measure_stage(n, &sol, &reference, &reg, op, p)?;
            Ok((sol, record))
        })();
        let (sol, mut record) = match stage {
            Ok(s) => s,
            Err(e) => return Err(fail(n, eps, e, &table, &stages)),
        };
        record.seconds = start.elapsed().as_secs_f64();
        if let Some(obs) = observer.as_mut() {
            obs(&record, &sol.trajectory);
        }
        let distance = record.distance;
        table.rows.push(record);
        stages.push(sol.trajectory);
        if n >= 2 && distance <= config.continuation_tol {
            stopped_early = n < config.epsilons.len();
            break;
        }
    }
    let trajectory = stages.last().expect("at least one stage").clone();
    Ok(ContinuationOutcome {
        trajectory,
        table,
        stages,
        stopped_early,
    })
}

//! run, check and sweep.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::artifacts::{self, num};
use super::config::{InstanceConfig, Mode, RawConfig};
use crate::error::{Error, Result};
use crate::periodic_solver::{
    continuation_solve, measure_stage, predicted_bound, solve_direct, Trajectory,
};
use crate::regularization::RegularizedOperator;
use crate::verification::{
    hypothesis_battery, manufactured_error, FourierOracle, OracleComparison, RunReport, UniformBound,
};

/// Exit status when every step ran but an a-posteriori check failed.
pub const EXIT_REJECTED: i32 = 5;

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Option<RunReport>,
    pub message: String,
}

impl RunOutcome {
    fn error(e: &Error) -> Self {
        Self {
            exit_code: e.exit_code(),
            report: None,
            message: e.to_string(),
        }
    }
}

fn log(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn finish(report: &mut RunReport, out: &Path, status: &str) -> Result<()> {
    report.status = status.to_string();
    artifacts::write_atomic(&out.join(artifacts::CONVERGENCE_FILE), &artifacts::convergence_csv(&report.stages))?;
    artifacts::write_atomic(&out.join(artifacts::REPORT_FILE), &report.render())
}

fn write_stages(out: &Path, stages: &[Trajectory]) -> Result<()> {
    for (i, t) in stages.iter().enumerate() {
        artifacts::write_atomic(&out.join(artifacts::stage_file(i + 1)), &artifacts::trajectory_csv(t))?;
    }
    Ok(())
}

/// Solve one instance and write its artifacts into `out`.
pub fn execute(cfg: &InstanceConfig, out: &Path, quiet: bool) -> RunOutcome {
    match execute_inner(cfg, out, quiet) {
        Ok(o) => o,
        Err(e) => RunOutcome::error(&e),
    }
}

fn execute_inner(cfg: &InstanceConfig, out: &Path, quiet: bool) -> Result<RunOutcome> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let instance = cfg.instance()?;
    let schedule = match cfg.mode {
        Mode::Continuation => cfg.solver.epsilons.clone(),
        Mode::Direct => vec![0.0],
    };
    let mode = match cfg.mode {
        Mode::Continuation => "continuation",
        Mode::Direct => "direct",
    };
    let mut report = RunReport::new(&cfg.name, mode, schedule, cfg.echo());
    report.battery = hypothesis_battery(&instance)?;
    let failures: Vec<&str> = report.battery.failures().iter().map(|c| c.name).collect();
    if !failures.is_empty() {
        let message = format!("hypothesis violated: {}", failures.join(", "));
        finish(&mut report, out, &message)?;
        return Ok(RunOutcome {
            exit_code: 3,
            report: Some(report),
            message,
        });
    }
    let (_, op) = instance.build()?;
    let p = cfg.solver.p;

    let (trajectory, stages) = match cfg.mode {
        Mode::Continuation => {
            let mut observer = |r: &crate::periodic_solver::StageRecord, _: &Trajectory| {
                log(
                    quiet,
                    format!(
                        "stage {:>3}  ε = {:.4e}  iterations {:>3}  d_n = {:.4e}  periodicity {:.2e}",
                        r.n, r.eps, r.iterations, r.distance, r.periodicity_residual
                    ),
                );
            };
            match continuation_solve(&op, &cfg.solver, Some(&mut observer)) {
                Ok(o) => {
                    for r in o.table.rows {
                        report.push_stage(r);
                    }
                    (o.trajectory, o.stages)
                }
                Err(f) => {
                    for r in f.table.rows {
                        report.push_stage(r);
                    }
                    write_stages(out, &f.stages)?;
                    let message = format!("stage {} (ε = {}) failed: {}", f.stage, f.eps, f.error);
                    finish(&mut report, out, &message)?;
                    return Ok(RunOutcome {
                        exit_code: f.error.exit_code(),
                        report: Some(report),
                        message,
                    });
                }
            }
        }
        Mode::Direct => {
            let reg = RegularizedOperator::new(op.ops_arc(), 0.0)?;
            let start = std::time::Instant::now();
            let sol = match solve_direct(&op, &cfg.solver) {
                Ok(s) => s,
                Err(e) => {
                    let message = e.to_string();
                    finish(&mut report, out, &message)?;
                    return Ok(RunOutcome {
                        exit_code: e.exit_code(),
                        report: Some(report),
                        message,
                    });
                }
            };
            let zero = Trajectory::zero(0.0, op.horizon(), cfg.steps, op.dof_count());
            let mut record = measure_stage(1, &sol, &zero, &reg, &op, p)?;
            record.seconds = start.elapsed().as_secs_f64();
            log(quiet, format!("direct solve: {} iterations", record.iterations));
            report.push_stage(record);
            (sol.trajectory.clone(), vec![sol.trajectory])
        }
    };
    write_stages(out, &stages)?;
    artifacts::write_atomic(
        &out.join(artifacts::FINAL_TRAJECTORY),
        &artifacts::trajectory_csv(&trajectory),
    )?;

    if let Some(predicted) = predicted_bound(&op, cfg.steps, p)? {
        let observed = report.stages.iter().map(|s| s.norm_lp_x).fold(0.0, f64::max);
        report.uniform_bound = Some(UniformBound {
            observed,
            predicted,
            safety_factor: 10.0,
        });
    }
    if cfg.fourier_oracle {
        let (a, m) = cfg.fourier_parameters()?;
        let oracle = FourierOracle::new(
            cfg.fourier_modes(),
            &cfg.extents,
            a,
            m,
            trajectory.eps,
            cfg.horizon,
        )?;
        let (max_error, l2_error) =
            manufactured_error(&trajectory, op.mesh(), &op.ops().mass, |t, z| oracle.value(t, z));
        report.oracle = Some(OracleComparison {
            max_error,
            l2_error,
            threshold: cfg.oracle_threshold,
        });
    }

    let accepted = report.accepted();
    let message = if accepted {
        "ok".to_string()
    } else {
        let mut why = Vec::new();
        if !report.energy_checks_hold() {
            why.push("energy identity or a-priori margin");
        }
        if report.uniform_bound.is_some_and(|b| !b.holds()) {
            why.push("uniform bound");
        }
        if report.oracle.is_some_and(|o| !o.holds()) {
            why.push("oracle threshold");
        }
        format!("rejected: {}", why.join(", "))
    };
    finish(&mut report, out, &message)?;
    Ok(RunOutcome {
        exit_code: if accepted { 0 } else { EXIT_REJECTED },
        report: Some(report),
        message,
    })
}

/// Run the hypothesis battery only.
pub fn check(cfg: &InstanceConfig) -> Result<(i32, String)> {
    let report = hypothesis_battery(&cfg.instance()?)?;
    let code = if report.all_pass() { 0 } else { 3 };
    Ok((code, report.table()))
}

#[derive(Debug)]
pub struct SweepEntry {
    pub value: String,
    pub outcome: RunOutcome,
}

/// One run per value, each in its own subdirectory, plus a summary CSV.
pub fn sweep(
    raw: &RawConfig,
    param: &str,
    values: &[String],
    out: &Path,
    seed: Option<u64>,
    quiet: bool,
) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    if !super::config::is_known_key(param) {
        return Err(Error::config(format!("unknown sweep parameter `{param}`")));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let entries: Vec<SweepEntry> = values
        .par_iter()
        .map(|value| {
            let dir: PathBuf = out.join(format!("{param}={value}"));
            let outcome = (|| -> Result<RunOutcome> {
                let mut raw = raw.clone();
                raw.set(param, value)?;
                let mut cfg = InstanceConfig::from_raw(&raw)?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                Ok(execute(&cfg, &dir, true))
            })()
            .unwrap_or_else(|e| RunOutcome::error(&e));
            log(quiet, format!("{param} = {value}: exit {} ({})", outcome.exit_code, outcome.message));
            SweepEntry {
                value: value.clone(),
                outcome,
            }
        })
        .collect();

    let mut csv = format!("{}\n", artifacts::SWEEP_HEADER);
    let mut previous: Option<f64> = None;
    for e in &entries {
        let r = e.outcome.report.as_ref();
        let field = |f: &dyn Fn(&RunReport) -> f64| r.map_or(String::new(), |r| num(f(r)));
        let err = r.and_then(|r| r.oracle).map(|o| o.l2_error);
        let ratio = match (previous, err) {
            (Some(p), Some(c)) if c > 0.0 => num(p / c),
            _ => String::new(),
        };
        previous = err;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            e.value,
            e.outcome.exit_code,
            r.map_or(0, |r| r.stages.len()),
            field(&|r| r.final_periodicity_residual()),
            field(&|r| r.final_boundary_residual()),
            field(&|r| r.max_inclusion_residual()),
            err.map_or(String::new(), num),
            ratio
        ));
    }
    artifacts::write_atomic(&out.join(artifacts::SWEEP_FILE), &csv)?;
    Ok(entries)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use perisolve::cli::{execute, InstanceConfig, RawConfig, RunOutcome};
use perisolve::discretization::{OperatorSet, SpatialDiscretization, Weight};
use perisolve::linalg;
use perisolve::operators::{
    ConvexTerm, Diffusion, Forcing, FourierMode, InclusionOperator, OperatorData, Temporal,
};
use perisolve::periodic_solver::{solve_periodic_eps, SolverConfig};
use perisolve::regularization::RegularizedOperator;
use perisolve::verification::{hypothesis_battery, oracle_tiny_periodic, CheckStatus, OracleSettings};

type Check = std::result::Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> InstanceConfig {
    InstanceConfig::load(&configs().join(name)).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_in(cfg: &InstanceConfig, dir: &Path) -> RunOutcome {
    execute(cfg, dir, true)
}

fn criterion(name: &str, limit: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panic: {msg}"))
    });
    let elapsed = start.elapsed();
    let (pass, detail) = match result {
        Ok(d) if elapsed <= limit => (true, d),
        Ok(d) => (false, format!("{d}; runtime {elapsed:.2?} exceeds {limit:?}")),
        Err(e) => (false, e),
    };
    println!(
        "{}  {name}  [{elapsed:.2?} / {limit:?}]  {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn hypothesis_battery_catches_violations() -> Check {
    let mut shipped = 0;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(configs())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "conf"))
        .collect();
    entries.sort();
    for path in entries {
        let cfg = InstanceConfig::load(&path).map_err(|e| e.to_string())?;
        let report = hypothesis_battery(&cfg.instance().unwrap()).unwrap();
        ensure(report.all_pass(), || format!("{}: {:?}", path.display(), report.failures()))?;
        shipped += 1;
    }
    let injected = [
        ("negative_weight.conf", "H(m)"),
        ("low_diffusion.conf", "H(a)"),
        ("nonconvex_g.conf", "H(g)"),
    ];
    for (file, expected) in injected {
        let cfg = InstanceConfig::load(&configs().join("invalid").join(file)).unwrap();
        let report = hypothesis_battery(&cfg.instance().unwrap()).unwrap();
        let names: Vec<&str> = report.failures().iter().map(|c| c.name).collect();
        ensure(names == [expected], || format!("{file}: failures {names:?}, expected [{expected}]"))?;
    }
    Ok(format!("{shipped} shipped instances clean, {} injected violations isolated", injected.len()))
}

fn operator_exactness() -> Check {
    let mesh = SpatialDiscretization::build(1, &[1.0], &[4]).unwrap();
    let ops = OperatorSet::assemble(&mesh, &Weight::Constant(1.0)).unwrap();
    let tridiag = |d: f64, o: f64| {
        nalgebra::DMatrix::from_fn(3, 3, |i, j| match i.abs_diff(j) {
            0 => d,
            1 => o,
            _ => 0.0,
        })
    };
    let j_err = (linalg::to_dense(&ops.riesz) - tridiag(8.0, -4.0)).abs().max();
    let b_err = (linalg::to_dense(&ops.weighted_mass) - tridiag(1.0 / 6.0, 1.0 / 24.0)).abs().max();
    ensure(j_err <= 1e-12, || format!("J error {j_err:e}"))?;
    ensure(b_err <= 1e-12, || format!("B error {b_err:e}"))?;

    let mesh = SpatialDiscretization::build(1, &[1.0], &[32]).unwrap();
    let half = Weight::Indicator { axis: 0, lower: 0.0, upper: 0.5, inside: 1.0, outside: 0.0 };
    let ops = Arc::new(OperatorSet::assemble(&mesh, &half).unwrap());
    let reg = RegularizedOperator::new(ops, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let u: Vec<f64> = (0..31).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..31).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let uv = reg.inner_product_vstar(&u, &v).unwrap();
        let vu = reg.inner_product_vstar(&v, &u).unwrap();
        worst = worst.max((uv - vu).abs());
    }
    ensure(worst <= 1e-12, || format!("V* asymmetry {worst:e}"))?;
    Ok(format!("|J err| {j_err:.1e}, |B err| {b_err:.1e}, V* asymmetry {worst:.1e}"))
}

fn regularized_periodic_solve() -> Check {
    let cfg = load("heat.conf");
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&cfg, dir.path());
    ensure(out.exit_code == 0, || out.message.clone())?;
    let report = out.report.unwrap();
    let stage = report.last_stage().unwrap();
    let oracle = report.oracle.unwrap();
    let threshold = cfg.oracle_threshold.unwrap();
    ensure(stage.periodicity_residual <= 1e-10, || {
        format!("periodicity residual {:e}", stage.periodicity_residual)
    })?;
    ensure(oracle.l2_error <= threshold, || format!("L2 error {:e} > {threshold:e}", oracle.l2_error))?;
    ensure(stage.iterations <= 200, || format!("{} Poincare iterations", stage.iterations))?;
    Ok(format!(
        "periodicity {:.1e}, L2 error {:.3e} <= {threshold:e}, {} iterations",
        stage.periodicity_residual, oracle.l2_error, stage.iterations
    ))
}

fn oracle_error(raw: &RawConfig, overrides: &[(&str, String)]) -> Result<f64, String> {
    let mut raw = raw.clone();
    raw.remove("oracle.threshold");
    for (k, v) in overrides {
        raw.set(k, v).map_err(|e| e.to_string())?;
    }
    let cfg = InstanceConfig::from_raw(&raw).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&cfg, dir.path());
    ensure(out.exit_code == 0, || format!("{overrides:?}: {}", out.message))?;
    Ok(out.report.unwrap().oracle.unwrap().l2_error)
}

fn refinement_orders() -> Check {
    let raw = RawConfig::load(&configs().join("heat.conf")).unwrap();
    let time: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|k| oracle_error(&raw, &[("time.steps", k.to_string())]))
        .collect::<Result<_, _>>()?;
    let space: Vec<f64> = [8usize, 16, 32]
        .iter()
        .map(|&n| {
            oracle_error(
                &raw,
                &[("domain.cells", n.to_string()), ("time.steps", (n * n).to_string())],
            )
        })
        .collect::<Result<_, _>>()?;
    let ratios = |e: &[f64]| e.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    let (rt, rh) = (ratios(&time), ratios(&space));
    ensure(rt.iter().all(|r| (1.7..=2.3).contains(r)), || format!("Δt ratios {rt:?}"))?;
    ensure(rh.iter().all(|r| (3.4..=4.6).contains(r)), || format!("h ratios {rh:?}"))?;
    Ok(format!("Δt ratios {rt:.3?}, h ratios {rh:.3?}"))
}

fn tiny_operator(cells: usize, g: ConvexTerm) -> InclusionOperator {
    let mesh = Arc::new(SpatialDiscretization::build(1, &[1.0], &[cells]).unwrap());
    let ops = Arc::new(OperatorSet::assemble(&mesh, &Weight::Constant(1.0)).unwrap());
    let forcing = Forcing::Fourier(vec![
        FourierMode { amplitude: 2.0, wavenumbers: vec![1], temporal: Temporal::Sin, frequency: 1.0 },
        FourierMode { amplitude: 0.5, wavenumbers: vec![1], temporal: Temporal::Cos, frequency: 2.0 },
    ]);
    let data = OperatorData {
        diffusion: Diffusion::Constant(1.0),
        a0: 1.0,
        convection: false,
        g,
        forcing,
        horizon: 1.0,
    };
    InclusionOperator::new(mesh, ops, data).unwrap()
}

fn tiny_oracle_equivalence() -> Check {
    let steps = 32;
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for cells in [2, 3] {
        for g in [ConvexTerm::Zero, ConvexTerm::Abs, ConvexTerm::HalfSquare] {
            for eps in [0.2, 1.0] {
                let op = tiny_operator(cells, g);
                let reg = RegularizedOperator::new(op.ops_arc(), eps).unwrap();
                let oracle = oracle_tiny_periodic(&reg, &op, steps, OracleSettings::default())
                    .map_err(|e| e.to_string())?;
                let config = SolverConfig { steps, ..SolverConfig::default() };
                let sol = solve_periodic_eps(&reg, &op, &config, None).map_err(|e| e.to_string())?;
                let diff = oracle
                    .states
                    .iter()
                    .zip(&sol.trajectory.states)
                    .map(|(a, b)| linalg::norm_inf(&linalg::sub(a, b)))
                    .fold(0.0, f64::max);
                ensure(diff <= 1e-6, || format!("dofs {}, {g:?}, ε = {eps}: {diff:e}", cells - 1))?;
                worst = worst.max(diff);
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases, worst max-nodal difference {worst:.1e}"))
}

fn degenerate_continuation() -> Check {
    let cfg = load("degenerate.conf");
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(&cfg, dir.path());
    ensure(out.exit_code == 0, || out.message.clone())?;
    let report = out.report.unwrap();
    let stages = &report.stages;
    ensure(stages.len() == 32, || format!("{} stages", stages.len()))?;
    for (i, s) in stages.iter().enumerate() {
        let n = i + 1;
        ensure(s.n == n && s.eps == 1.0 / n as f64, || format!("stage {n} has ε = {}", s.eps))?;
        ensure(s.periodicity_residual <= 1e-8, || {
            format!("stage {n}: periodicity residual {:e}", s.periodicity_residual)
        })?;
        ensure(s.inclusion_residual <= 1e-6, || {
            format!("stage {n}: membership residual {:e}", s.inclusion_residual)
        })?;
        ensure(s.energy.margin_holds(), || format!("stage {n}: energy margin {:?}", s.energy))?;
    }
    let d: Vec<f64> = stages.iter().map(|s| s.distance).collect();
    let tail = &d[d.len() - 3..];
    ensure(tail.windows(2).all(|w| w[1] <= w[0]), || format!("d_n tail {tail:?}"))?;
    let boundary = report.final_boundary_residual();
    ensure(boundary <= 1e-8, || format!("boundary residual {boundary:e}"))?;
    let margin = stages
        .iter()
        .map(|s| s.energy.margin / (10.0 * s.energy.tau))
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "32 stages, d_n tail {:.3e} {:.3e} {:.3e}, boundary {boundary:.1e}, membership {:.1e}, min margin/10τ {margin:.2e}",
        tail[0],
        tail[1],
        tail[2],
        report.max_inclusion_residual()
    ))
}

fn prox_monotonicity_suite() -> Check {
    let cfg = load("default.conf");
    let base = cfg.instance().unwrap();
    let names = ["prox nonexpansive", "resolvent identity", "selection monotone", "H(A)(iii) growth"];
    let catalog = [
        ConvexTerm::Zero,
        ConvexTerm::Abs,
        ConvexTerm::HalfSquare,
        ConvexTerm::PositivePartSquare,
        ConvexTerm::ScaledAbs(2.5),
    ];
    for g in catalog {
        let mut instance = base.clone();
        instance.data.g = g;
        instance.probes = 1000;
        let report = hypothesis_battery(&instance).unwrap();
        for name in names {
            let c = report.get(name).unwrap();
            ensure(c.status == CheckStatus::Pass, || format!("{g:?}: {name}: {}", c.detail))?;
        }
    }
    Ok(format!("{} checks x {} potentials, 1000 probes each", names.len(), catalog.len()))
}

fn csv_files(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Wall-clock seconds are the only nondeterministic column.
fn without_seconds(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Check {
    let mut compared = 0;
    for name in ["degenerate.conf", "default.conf", "heat2d.conf"] {
        let cfg = load(name);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        ensure(run_in(&cfg, a.path()).exit_code == 0, || format!("{name} failed"))?;
        ensure(run_in(&cfg, b.path()).exit_code == 0, || format!("{name} failed"))?;
        let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
        ensure(fa.len() == fb.len() && !fa.is_empty(), || format!("{name}: file sets differ"))?;
        for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
            let same = if na == "convergence.csv" {
                without_seconds(ca) == without_seconds(cb)
            } else {
                ca.as_bytes() == cb.as_bytes()
            };
            ensure(na == nb && same, || format!("{name}: {na} differs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files identical across repeated runs"))
}

fn main() {
    let results = [
        criterion("hypothesis battery", Duration::from_secs(5), hypothesis_battery_catches_violations),
        criterion("operator exactness", Duration::from_secs(5), operator_exactness),
        criterion("regularized periodic solve", Duration::from_secs(10), regularized_periodic_solve),
        criterion("refinement orders", Duration::from_secs(120), refinement_orders),
        criterion("tiny oracle equivalence", Duration::from_secs(30), tiny_oracle_equivalence),
        criterion("degenerate continuation", Duration::from_secs(180), degenerate_continuation),
        criterion("prox and monotonicity suite", Duration::from_secs(5), prox_monotonicity_suite),
        criterion("determinism", Duration::from_secs(300), determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

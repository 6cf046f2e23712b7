use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use perisolve::cli::{InstanceConfig, RawConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn perisolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perisolve"))
        .args(args)
        .env_remove("PERISOLVE_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn conf(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_value(dir: &Path, key: &str) -> Option<String> {
    let text = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn zero_instance_gives_zero_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = perisolve(&["--quiet", "--output-dir", out, "run", &conf("zero.conf")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("trajectory_final.csv"));
    assert_eq!(rows[0][0], "t");
    assert_eq!(rows[0][1], "node_1");
    assert_eq!(rows.len(), 21 + 1);
    for row in &rows[1..] {
        assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
    let conv = read_csv(&dir.path().join("convergence.csv"));
    assert_eq!(
        conv[0].join(","),
        "n,epsilon,d_n,periodicity_residual,inclusion_residual,iterations,seconds"
    );
    // d_2 = 0 stops the continuation early
    assert_eq!(conv.len(), 3);
    for n in 1..=2 {
        assert!(dir.path().join(format!("trajectory_stage_{n:03}.csv")).exists());
    }
    assert!(!dir.path().join("trajectory_stage_003.csv").exists());
}

#[test]
fn heat_report_carries_oracle_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = perisolve(&["--quiet", "--output-dir", dir.path().to_str().unwrap(), "run", &conf("heat.conf")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err: f64 = report_value(dir.path(), "oracle.l2_error").unwrap().parse().unwrap();
    let threshold: f64 = report_value(dir.path(), "oracle.threshold").unwrap().parse().unwrap();
    assert!(err <= threshold);
    assert_eq!(report_value(dir.path(), "oracle.holds").as_deref(), Some("true"));
}

#[test]
fn violated_hypotheses_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = perisolve(&["--output-dir", out, "run", &conf("invalid/negative_weight.conf")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("H(m)"), "{}", stderr(&o));
    assert!(report_value(dir.path(), "status").unwrap().contains("H(m)"));

    let o = perisolve(&["check", &conf("invalid/low_diffusion.conf")]);
    assert_eq!(o.status.code(), Some(3));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.lines().any(|l| l.starts_with("H(a)") && l.contains("FAIL")), "{table}");

    let o = perisolve(&["check", &conf("invalid/nonconvex_g.conf")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_exit_codes() {
    for name in ["default.conf", "heat.conf", "degenerate.conf", "heat2d.conf", "convection.conf"] {
        let o = perisolve(&["check", &conf(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let o = perisolve(&["check", &conf("invalid/malformed.conf")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = perisolve(&["check", &conf("missing.conf")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.conf");
    std::fs::write(&path, "name = typo\ng.knd = abs\n").unwrap();
    let o = perisolve(&["check", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("g.knd"), "{}", stderr(&o));
}

#[test]
fn nonconvergence_exits_4_with_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = std::fs::read_to_string(configs().join("degenerate.conf")).unwrap();
    text = text.replace("solver.schedule = harmonic 32", "solver.schedule = harmonic 4");
    text.push_str("solver.max_poincare = 2\n");
    let path = dir.path().join("capped.conf");
    std::fs::write(&path, text).unwrap();
    let out = dir.path().join("out");
    let o = perisolve(&["--quiet", "--output-dir", out.to_str().unwrap(), "run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(out.join("report.txt").exists());
    assert!(out.join("convergence.csv").exists());
    assert!(!out.join("trajectory_final.csv").exists());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_perisolve"))
        .args(["--quiet", "run", &conf("zero.conf")])
        .env("PERISOLVE_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("trajectory_final.csv").exists());
}

#[test]
fn sweep_over_time_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = perisolve(&[
        "--quiet", "--output-dir", out, "sweep", &conf("heat.conf"), "--param", "time.steps", "--values",
        "50,100,200",
    ]);
    // the coarse values miss the threshold frozen for 400 steps
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    let rows = read_csv(&dir.path().join("sweep_summary.csv"));
    assert_eq!(rows.len(), 4);
    let ratio_col = rows[0].iter().position(|c| c == "error_ratio").unwrap();
    for row in &rows[2..] {
        let r: f64 = row[ratio_col].parse().unwrap();
        assert!((1.7..=2.3).contains(&r), "{r}");
    }
    for v in ["50", "100", "200"] {
        assert!(dir.path().join(format!("time.steps={v}")).join("trajectory_final.csv").exists());
    }
}

#[test]
fn sweep_over_one_value_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let swept = dir.path().join("sweep");
    let single = dir.path().join("run");
    let o = perisolve(&[
        "--quiet", "--output-dir", swept.to_str().unwrap(), "sweep", &conf("default.conf"), "--param", "seed",
        "--values", "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = perisolve(&["--quiet", "--output-dir", single.to_str().unwrap(), "run", &conf("default.conf")]);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(swept.join("seed=7").join("trajectory_final.csv")).unwrap();
    let b = std::fs::read(single.join("trajectory_final.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_errors() {
    let o = perisolve(&["sweep", &conf("heat.conf"), "--param", "time.steps", "--values", ""]);
    assert_eq!(o.status.code(), Some(2));
    let o = perisolve(&["sweep", &conf("heat.conf"), "--param", "no.such.key", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_sweep_value_does_not_abort_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let o = perisolve(&[
        "--quiet", "--output-dir", dir.path().to_str().unwrap(), "sweep", &conf("default.conf"), "--param",
        "weight.value", "--values", "x,1.0",
    ]);
    assert_ne!(o.status.code(), Some(0));
    let rows = read_csv(&dir.path().join("sweep_summary.csv"));
    // weight.value is unused for an indicator weight, so both values are config errors
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r[1] == "2"));

    let dir = tempfile::tempdir().unwrap();
    let o = perisolve(&[
        "--quiet", "--output-dir", dir.path().to_str().unwrap(), "sweep", &conf("default.conf"), "--param",
        "g.kind", "--values", "abs,nonsense,half_square",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let rows = read_csv(&dir.path().join("sweep_summary.csv"));
    let codes: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(codes, ["0", "2", "0"]);
}

#[test]
fn report_echo_reparses_to_the_same_instance() {
    for name in ["default.conf", "heat.conf", "heat2d.conf", "convection.conf"] {
        let dir = tempfile::tempdir().unwrap();
        let o = perisolve(&["--quiet", "--output-dir", dir.path().to_str().unwrap(), "run", &conf(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        let echo: String = report
            .lines()
            .filter_map(|l| l.strip_prefix("config."))
            .map(|l| format!("{l}\n"))
            .collect();
        let again = InstanceConfig::from_raw(&RawConfig::parse(&echo, &configs()).unwrap()).unwrap();
        let original = InstanceConfig::load(&configs().join(name)).unwrap();
        assert_eq!(again, original, "{name}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = perisolve(&["--quiet", "--seed", "99", "--output-dir", dir.path().to_str().unwrap(), "run", &conf("zero.conf")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report_value(dir.path(), "config.seed").as_deref(), Some("99"));
}

//! CSV and report files. Every file is written to a temporary name and
//! renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::periodic_solver::{StageRecord, Trajectory};

pub const CONVERGENCE_HEADER: &str =
    "n,epsilon,d_n,periodicity_residual,inclusion_residual,iterations,seconds";

pub const SWEEP_HEADER: &str = "value,exit_code,stages,final_periodicity_residual,\
final_boundary_residual,inclusion_residual,oracle_l2_error,error_ratio";

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",node_{i}");
    }
    out.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.states) {
        out.push_str(&num(*t));
        for v in y {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn convergence_csv(rows: &[StageRecord]) -> String {
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            num(r.eps),
            num(r.distance),
            num(r.periodicity_residual),
            num(r.inclusion_residual),
            r.iterations,
            num(r.seconds)
        );
    }
    out
}

pub fn stage_file(n: usize) -> String {
    format!("trajectory_stage_{n:03}.csv")
}

pub const FINAL_TRAJECTORY: &str = "trajectory_final.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const SWEEP_FILE: &str = "sweep_summary.csv";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn trajectory_layout() {
        let t = Trajectory::zero(1.0, 1.0, 2, 3);
        let csv = trajectory_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,node_1,node_2,node_3");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3].split(',').count(), 4);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.txt");
        write_atomic(&p, "a").unwrap();
        write_atomic(&p, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

//! Structured key-value run report.

use std::fmt::Write as _;

use super::BatteryReport;
use crate::periodic_solver::StageRecord;

/// Largest ‖y^(n)‖_{L^p(T,X)} across stages against the a-priori prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBound {
    pub observed: f64,
    pub predicted: f64,
    pub safety_factor: f64,
}

impl UniformBound {
    pub fn holds(&self) -> bool {
        self.observed <= self.safety_factor * self.predicted
    }
}

/// Error of the final trajectory against a closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleComparison {
    pub max_error: f64,
    pub l2_error: f64,
    pub threshold: Option<f64>,
}

impl OracleComparison {
    pub fn holds(&self) -> bool {
        self.threshold.is_none_or(|t| self.l2_error <= t)
    }
}

/// Everything measured during one run. Stages are appended as they finish.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub instance: String,
    pub mode: String,
    pub schedule: Vec<f64>,
    pub stages: Vec<StageRecord>,
    pub battery: BatteryReport,
    pub uniform_bound: Option<UniformBound>,
    pub oracle: Option<OracleComparison>,
    pub status: String,
    pub config_echo: String,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunReport {
    pub fn new(instance: &str, mode: &str, schedule: Vec<f64>, config_echo: String) -> Self {
        Self {
            instance: instance.to_string(),
            mode: mode.to_string(),
            schedule,
            stages: Vec::new(),
            battery: BatteryReport::default(),
            uniform_bound: None,
            oracle: None,
            status: "running".into(),
            config_echo,
        }
    }

    pub fn push_stage(&mut self, record: StageRecord) {
        self.stages.push(record);
    }

    pub fn last_stage(&self) -> Option<&StageRecord> {
        self.stages.last()
    }

    /// |B y_0 − B y_K|_* of the last stage.
    pub fn final_boundary_residual(&self) -> f64 {
        self.last_stage().map_or(f64::NAN, |s| s.boundary_residual)
    }

    pub fn final_periodicity_residual(&self) -> f64 {
        self.last_stage().map_or(f64::NAN, |s| s.periodicity_residual)
    }

    pub fn max_inclusion_residual(&self) -> f64 {
        self.stages.iter().map(|s| s.inclusion_residual).fold(f64::NAN, f64::max)
    }

    pub fn max_inclusion_residual_lp(&self) -> f64 {
        self.stages.iter().map(|s| s.inclusion_residual_lp).fold(f64::NAN, f64::max)
    }

    /// Smallest a-priori margin measured in units of 10·τ_energy.
    pub fn min_energy_margin(&self) -> f64 {
        self.stages.iter().map(|s| s.energy.margin).fold(f64::NAN, f64::min)
    }

    pub fn energy_checks_hold(&self) -> bool {
        self.stages
            .iter()
            .all(|s| s.energy.identity_holds() && s.energy.margin_holds())
    }

    /// Whether every measured property holds.
    pub fn accepted(&self) -> bool {
        self.battery.all_pass()
            && self.energy_checks_hold()
            && self.uniform_bound.is_none_or(|b| b.holds())
            && self.oracle.is_none_or(|o| o.holds())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("instance", self.instance.clone());
        kv("mode", self.mode.clone());
        kv("status", self.status.clone());
        kv(
            "schedule",
            self.schedule.iter().map(|&e| num(e)).collect::<Vec<_>>().join(","),
        );
        kv("stages", self.stages.len().to_string());
        kv("final.periodicity_residual", num(self.final_periodicity_residual()));
        kv("final.boundary_residual", num(self.final_boundary_residual()));
        kv("final.inclusion_residual_max", num(self.max_inclusion_residual()));
        kv("final.inclusion_residual_lp", num(self.max_inclusion_residual_lp()));
        kv("final.energy_margin_min", num(self.min_energy_margin()));
        kv("final.energy_checks", self.energy_checks_hold().to_string());
        match self.uniform_bound {
            Some(b) => {
                kv("bound.observed", num(b.observed));
                kv("bound.predicted", num(b.predicted));
                kv("bound.safety_factor", num(b.safety_factor));
                kv("bound.holds", b.holds().to_string());
            }
            None => kv("bound.holds", "unavailable".into()),
        }
        if let Some(o) = self.oracle {
            kv("oracle.max_error", num(o.max_error));
            kv("oracle.l2_error", num(o.l2_error));
            kv(
                "oracle.threshold",
                o.threshold.map_or("none".to_string(), num),
            );
            kv("oracle.holds", o.holds().to_string());
        }
        kv("accepted", self.accepted().to_string());
        for s in &self.stages {
            let p = format!("stage.{}", s.n);
            kv(&format!("{p}.epsilon"), num(s.eps));
            kv(&format!("{p}.iterations"), s.iterations.to_string());
            kv(&format!("{p}.d_n"), num(s.distance));
            kv(&format!("{p}.periodicity_residual"), num(s.periodicity_residual));
            kv(&format!("{p}.boundary_residual"), num(s.boundary_residual));
            kv(&format!("{p}.inclusion_residual_max"), num(s.inclusion_residual));
            kv(&format!("{p}.inclusion_residual_lp"), num(s.inclusion_residual_lp));
            kv(&format!("{p}.energy_defect"), num(s.energy.defect));
            kv(&format!("{p}.energy_tau"), num(s.energy.tau));
            kv(&format!("{p}.energy_margin"), num(s.energy.margin));
            kv(&format!("{p}.norm_lp_x"), num(s.norm_lp_x));
            kv(&format!("{p}.norm_lp_vstar"), num(s.norm_lp_vstar));
            kv(&format!("{p}.seconds"), num(s.seconds));
            kv(
                &format!("{p}.residual_history"),
                s.residual_history.iter().map(|&r| num(r)).collect::<Vec<_>>().join(","),
            );
        }
        for c in &self.battery.checks {
            let key = format!("check.{}", c.name.replace(' ', "_"));
            kv(&format!("{key}.status"), c.status.to_string());
            kv(&format!("{key}.margin"), num(c.margin));
        }
        out.push_str("\n# parsed configuration\n");
        for line in self.config_echo.lines() {
            let _ = writeln!(out, "config.{line}");
        }
        out
    }
}

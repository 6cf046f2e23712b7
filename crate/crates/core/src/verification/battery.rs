//! Hypothesis checks with measured margins. Failures are data.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Instance;
use crate::discretization::{assemble_mass, assemble_riesz_j, embedding_constant, OperatorSet};
use crate::error::Result;
use crate::linalg::{self, BandedCholesky};
use crate::operators::{ConvexTerm, InclusionOperator};
use crate::regularization::{DualNorm, RegularizedOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not run because a check it relies on failed.
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    /// Smallest slack observed; negative means violated. NaN when skipped.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatteryReport {
    pub checks: Vec<CheckResult>,
}

impl BatteryReport {
    /// No check failed. Skips only occur next to a failure or for
    /// properties that do not apply to the instance.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<width$}  {:<7}  margin {:>12.4e}  {}\n",
                c.name, c.status, c.margin, c.detail
            ));
        }
        out
    }
}

struct Probe {
    worst: f64,
    detail: String,
}

impl Probe {
    fn new() -> Self {
        Self {
            worst: f64::INFINITY,
            detail: String::new(),
        }
    }

    /// Record slack = bound − value, scaled by `scale` for the pass test.
    fn record(&mut self, slack: f64, scale: f64, tol: f64, what: impl FnOnce() -> String) -> bool {
        let ok = slack >= -tol * scale && slack.is_finite();
        if slack < self.worst || !slack.is_finite() {
            self.worst = if slack.is_finite() { slack } else { f64::NEG_INFINITY };
            if !ok {
                self.detail = what();
            }
        }
        ok
    }
}

fn result(name: &'static str, ok: bool, margin: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        margin,
        detail: detail.into(),
    }
}

fn skipped(name: &'static str, because: &str) -> CheckResult {
    CheckResult {
        name,
        status: CheckStatus::Skipped,
        margin: f64::NAN,
        detail: format!("needs {because}"),
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                scale * rng.gen_range(-1.0..1.0)
            }
        })
        .collect()
}

fn random_subgradient(rng: &mut ChaCha8Rng, g: ConvexTerm, x: f64) -> f64 {
    let (lo, hi) = g.subdifferential_interval(x);
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Check names, in report order.
pub const CHECK_NAMES: [&str; 15] = [
    "H(m)",
    "H(a)",
    "H(g)",
    "J SPD",
    "M SPD",
    "H(B) symmetric",
    "H(B) monotone",
    "embedding",
    "V* inner product",
    "prox nonexpansive",
    "resolvent identity",
    "selection monotone",
    "H(A)(iii) growth",
    "H(A)(iv) coercivity",
    "A monotone",
];

/// Run every structural check on an instance.
pub fn hypothesis_battery(instance: &Instance) -> Result<BatteryReport> {
    let mesh = &*instance.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(instance.seed);
    let probes = instance.probes.max(1);
    let mut checks = Vec::new();
    let data = &instance.data;
    let g = data.g;

    // H(m)
    let m_samples = instance.weight.element_samples(mesh)?;
    let m_min = m_samples.iter().copied().fold(f64::INFINITY, f64::min);
    let m_ok = m_samples.iter().all(|v| v.is_finite() && *v >= 0.0);
    checks.push(result(
        "H(m)",
        m_ok,
        m_min,
        if m_ok {
            format!("min m = {m_min:e}")
        } else {
            let e = m_samples.iter().position(|v| !(*v >= 0.0)).unwrap_or(0);
            format!("m = {:e} < 0 at element {e}", m_samples[e])
        },
    ));

    // H(a) on every time node
    let times: Vec<f64> = if data.diffusion.is_time_independent() {
        vec![0.0]
    } else {
        (0..=instance.steps)
            .map(|k| data.horizon * k as f64 / instance.steps as f64)
            .collect()
    };
    let mut a_min = f64::INFINITY;
    let mut a_where = (0.0, 0);
    for &t in &times {
        let s = data.diffusion.element_samples(mesh, t)?;
        for (e, &v) in s.iter().enumerate() {
            if !(v >= a_min) {
                a_min = v;
                a_where = (t, e);
            }
        }
    }
    let a_margin = a_min - data.a0;
    let a_ok = data.a0 > 0.0 && a_margin >= 0.0;
    checks.push(result(
        "H(a)",
        a_ok,
        if data.a0 > 0.0 { a_margin } else { data.a0 },
        if !(data.a0 > 0.0) {
            format!("a₀ = {} is not positive", data.a0)
        } else if a_ok {
            format!("min a − a₀ = {a_margin:e}")
        } else {
            format!(
                "a = {a_min:e} < a₀ = {} at t = {}, element {}",
                data.a0, a_where.0, a_where.1
            )
        },
    ));

    // H(g): convexity of the catalog entry
    let g_ok = {
        let mut p = Probe::new();
        let mut ok = g.validate().is_ok();
        for _ in 0..probes {
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            let x = r * rng.gen_range(-1.0..1.0);
            let y = r * rng.gen_range(-1.0..1.0);
            let th: f64 = rng.gen_range(0.0..=1.0);
            let lhs = g.value(th * x + (1.0 - th) * y);
            let rhs = th * g.value(x) + (1.0 - th) * g.value(y);
            ok &= p.record(rhs - lhs, 1.0 + rhs.abs(), 1e-12, || {
                format!("convexity fails between {x:e} and {y:e}")
            });
            let (lo, hi) = g.subdifferential_interval(x);
            ok &= p.record(hi - lo, 1.0, 0.0, || format!("empty subdifferential at {x:e}"));
        }
        let detail = match g.validate() {
            Err(e) => e.to_string(),
            Ok(()) if ok => format!("{} convex on {probes} probes", g.name()),
            Ok(()) => p.detail.clone(),
        };
        checks.push(result("H(g)", ok, p.worst, detail));
        ok
    };

    // Gram matrices that do not involve m
    let riesz = assemble_riesz_j(mesh);
    let mass = assemble_mass(mesh);
    for (name, mat) in [("J SPD", &riesz), ("M SPD", &mass)] {
        let sym = linalg::is_exactly_symmetric(mat);
        match BandedCholesky::factor(mat) {
            Ok(f) => {
                let (lo, hi) = f.pivot_range();
                checks.push(result(
                    name,
                    sym,
                    lo,
                    if sym {
                        format!("pivots in [{lo:e}, {hi:e}]")
                    } else {
                        "not exactly symmetric".to_string()
                    },
                ))
            }
            Err(e) => checks.push(result(name, false, f64::NEG_INFINITY, e.to_string())),
        }
    }
    let ops = Arc::new(OperatorSet {
        weighted_mass: mesh.assemble_weighted_mass(&m_samples),
        lumped_mass: mesh.lumped_mass(),
        riesz,
        mass,
        weight_samples: m_samples.clone(),
    });

    if m_ok {
        let sym = linalg::is_exactly_symmetric(&ops.weighted_mass);
        checks.push(result(
            "H(B) symmetric",
            sym,
            0.0,
            if sym { "exact" } else { "B ≠ Bᵀ" },
        ));
        let b_diag = linalg::diagonal(&ops.weighted_mass);
        let m_diag = linalg::diagonal(&ops.mass);
        let bmax = b_diag.iter().copied().fold(0.0, f64::max);
        let mmax = m_diag.iter().copied().fold(0.0, f64::max);
        let delta = 1e-10 * if bmax > 0.0 { bmax / mmax } else { 1.0 };
        let shifted = linalg::lin_comb(1.0, &ops.weighted_mass, delta, &ops.mass);
        match BandedCholesky::factor(&shifted) {
            Ok(f) => checks.push(result(
                "H(B) monotone",
                true,
                f.pivot_range().0,
                format!("B + {delta:.1e}·M is positive definite"),
            )),
            Err(e) => checks.push(result("H(B) monotone", false, f64::NEG_INFINITY, e.to_string())),
        }
    } else {
        checks.push(skipped("H(B) symmetric", "H(m)"));
        checks.push(skipped("H(B) monotone", "H(m)"));
    }

    // embedding |y|_H ≤ c_e ‖y‖
    let n = ops.dof_count();
    let c_e = embedding_constant(&ops, false)?;
    {
        let mut p = Probe::new();
        let mut ok = c_e.is_finite() && c_e > 0.0;
        for _ in 0..probes {
            let y = random_vector(&mut rng, n);
            let h = ops.norm_h(&y);
            let x = ops.norm_x(&y);
            ok &= p.record(c_e * x - h, x, 1e-8, || "embedding bound exceeded".into());
        }
        let detail = if ok {
            format!("c_e = {c_e:.6e}")
        } else {
            p.detail.clone()
        };
        checks.push(result("embedding", ok, p.worst, detail));
    }

    let dual = DualNorm::new(&ops)?;
    if m_ok {
        let eps = instance.eps_probe;
        let reg = RegularizedOperator::new(ops.clone(), eps)?;
        let m_max = m_samples.iter().copied().fold(0.0, f64::max);
        let mut p = Probe::new();
        let mut ok = true;
        for _ in 0..100 {
            let u = random_vector(&mut rng, n);
            let v = random_vector(&mut rng, n);
            let a = reg.inner_product_vstar(&u, &v)?;
            let b = reg.inner_product_vstar(&v, &u)?;
            ok &= p.record(-(a - b).abs(), 1.0 + a.abs(), 1e-12, || "asymmetric".into());
            let q = reg.inner_product_vstar(&u, &u)?;
            let d = dual.norm(&u).powi(2);
            ok &= p.record(d / eps - q, d / eps, 1e-10, || "above ‖u‖²_*/ε".into());
            ok &= p.record(q - d / (eps + m_max * c_e * c_e), q, 1e-10, || {
                "below ‖u‖²_*/(ε + m_max c_e²)".into()
            });
        }
        let detail = if ok {
            format!("symmetric and equivalent to ‖·‖_* at ε = {eps}")
        } else {
            p.detail.clone()
        };
        checks.push(result("V* inner product", ok, p.worst, detail));
    } else {
        checks.push(skipped("V* inner product", "H(m)"));
    }

    if g_ok {
        let mut nonexp = Probe::new();
        let mut ident = Probe::new();
        let mut mono = Probe::new();
        let (mut ok_n, mut ok_i, mut ok_m) = (true, true, true);
        for _ in 0..probes {
            let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
            let x = rng.gen_range(-10.0..10.0);
            let y = rng.gen_range(-10.0..10.0);
            let px = g.prox(lambda, x)?;
            let py = g.prox(lambda, y)?;
            // firm nonexpansiveness implies nonexpansiveness
            let lhs = (px - py).powi(2);
            let rhs = (x - y) * (px - py);
            ok_n &= nonexp.record(rhs - lhs, 1.0 + rhs.abs(), 1e-12, || {
                format!("prox expands at x = {x:e}, y = {y:e}, λ = {lambda:e}")
            });
            let w = (x - px) / lambda;
            let d = g.distance_to_subdifferential(px, w);
            ok_i &= ident.record(-d, 1.0 + w.abs(), 1e-12, || {
                format!("(x − prox)/λ ∉ ∂g(prox) at x = {x:e}, λ = {lambda:e}")
            });
            let wy = (y - py) / lambda;
            let s = (w - wy) * (x - y);
            ok_m &= mono.record(s, 1.0 + s.abs(), 1e-12, || "Yosida selection not monotone".into());
            let a = random_subgradient(&mut rng, g, px);
            let b = random_subgradient(&mut rng, g, py);
            let s = (a - b) * (px - py);
            ok_m &= mono.record(s, 1.0 + s.abs(), 1e-12, || "subgradients not monotone".into());
        }
        for (name, ok, p) in [
            ("prox nonexpansive", ok_n, nonexp),
            ("resolvent identity", ok_i, ident),
            ("selection monotone", ok_m, mono),
        ] {
            let detail = if ok {
                format!("{probes} probes")
            } else {
                p.detail
            };
            checks.push(result(name, ok, p.worst, detail));
        }
    } else {
        for name in ["prox nonexpansive", "resolvent identity", "selection monotone"] {
            checks.push(skipped(name, "H(g)"));
        }
    }

    let operator_names = ["H(A)(iii) growth", "H(A)(iv) coercivity", "A monotone"];
    let missing: Vec<&str> = [("H(m)", m_ok), ("H(a)", a_ok), ("H(g)", g_ok)]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    if !missing.is_empty() {
        for name in operator_names {
            checks.push(skipped(name, &missing.join(", ")));
        }
        return Ok(BatteryReport { checks });
    }
    let op = InclusionOperator::new(instance.mesh.clone(), ops.clone(), instance.data.clone())?;
    operator_checks(&op, &dual, &mut rng, probes, &mut checks)?;
    Ok(BatteryReport { checks })
}

fn operator_checks(
    op: &InclusionOperator,
    dual: &DualNorm,
    rng: &mut ChaCha8Rng,
    probes: usize,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    let n = op.dof_count();
    let c = op.constants();
    let g = op.g();
    let lumped = &op.ops().lumped_mass;
    let selection = |rng: &mut ChaCha8Rng, t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let mut v = op.eval_a1(t, y)?;
        for i in 0..n {
            v[i] += lumped[i] * random_subgradient(rng, g, y[i]);
        }
        Ok(v)
    };
    let mut growth = Probe::new();
    let mut coerc = Probe::new();
    let mut mono = Probe::new();
    let (mut ok_g, mut ok_c, mut ok_m) = (true, c.c3 > 0.0, true);
    for _ in 0..probes {
        let t = rng.gen_range(0.0..op.horizon());
        let y = random_vector(rng, n);
        let v = selection(rng, t, &y)?;
        let ny = op.ops().norm_x(&y);
        let nv = dual.norm(&v);
        let bound = c.c1 + c.c2 * ny.powf(c.p - 1.0);
        ok_g &= growth.record(bound - nv, bound, 1e-10, || {
            format!("‖v‖_* = {nv:e} > c₁ + c₂‖y‖^(p−1) = {bound:e}")
        });
        let pairing = linalg::dot(&v, &y);
        let lower = c.c3 * ny.powf(c.p) - c.c4;
        ok_c &= coerc.record(pairing - lower, 1.0 + pairing.abs() + lower.abs(), 1e-10, || {
            format!("⟨v, y⟩ = {pairing:e} < c₃‖y‖^p − c₄ = {lower:e}")
        });
        if !op.convection() {
            let z = random_vector(rng, n);
            let w = selection(rng, t, &z)?;
            let d = linalg::dot(&linalg::sub(&v, &w), &linalg::sub(&y, &z));
            let scale = 1.0 + linalg::dot(&v, &y).abs() + linalg::dot(&w, &z).abs();
            ok_m &= mono.record(d, scale, 1e-10, || "⟨v − w, y − z⟩ < 0".into());
        }
    }
    checks.push(result(
        "H(A)(iii) growth",
        ok_g,
        growth.worst,
        if ok_g {
            format!("c₁ = {:.4e}, c₂ = {:.4e}", c.c1, c.c2)
        } else {
            growth.detail
        },
    ));
    checks.push(result(
        "H(A)(iv) coercivity",
        ok_c,
        if c.c3 > 0.0 { coerc.worst } else { c.c3 },
        if !(c.c3 > 0.0) {
            format!(
                "c₃ = {:.4e} ≤ 0: the convection bound exceeds a₀ by a factor {:.3}",
                c.c3, c.convection_defect
            )
        } else if ok_c {
            format!("c₃ = {:.4e}, c₄ = {:.4e}", c.c3, c.c4)
        } else {
            coerc.detail
        },
    ));
    if op.convection() {
        checks.push(CheckResult {
            name: "A monotone",
            status: CheckStatus::Skipped,
            margin: f64::NAN,
            detail: "convection makes A pseudo-monotone only".into(),
        });
    } else {
        checks.push(result(
            "A monotone",
            ok_m,
            mono.worst,
            if ok_m { format!("{probes} probes") } else { mono.detail },
        ));
    }
    Ok(())
}

//! The map A(t, y) = A₁(t, y) + N_g(y): time-dependent diffusion with a
//! sin(u)·Σ D_k u convection term, plus the nodal subdifferential of a
//! scalar convex function.
//!
//! The multivalued part acts through the lumped mass M_L (row sums of the
//! interior mass matrix): a covector `r` belongs to N_g(y) when
//! `r_i / ℓ_i ∈ ∂g(y_i)` at every node. Lumping keeps N_g monotone and the
//! resolvent separable.

mod convex;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub use convex::ConvexTerm;

use crate::discretization::{embedding_constant, OperatorSet, SpatialDiscretization};
use crate::error::{Error, Result};
use crate::linalg::{self, SparseMatrix};

/// Diffusion coefficient a(t, z) ≥ a₀ > 0.
#[derive(Clone)]
pub enum Diffusion {
    Constant(f64),
    /// base·(1 + time_amplitude·sin(2πt/period))·(1 + space_amplitude·Π_d sin(π z_d / l_d))
    Separable {
        base: f64,
        time_amplitude: f64,
        space_amplitude: f64,
        period: f64,
    },
    /// Time-independent, one value per element.
    Table(Vec<f64>),
    Function(Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Constant(v) => write!(f, "Constant({v})"),
            Diffusion::Separable {
                base,
                time_amplitude,
                space_amplitude,
                period,
            } => write!(
                f,
                "Separable(base {base}, time {time_amplitude}, space {space_amplitude}, period {period})"
            ),
            Diffusion::Table(t) => write!(f, "Table({} values)", t.len()),
            Diffusion::Function(_) => write!(f, "Function"),
        }
    }
}

impl Diffusion {
    pub fn is_time_independent(&self) -> bool {
        match self {
            Diffusion::Constant(_) | Diffusion::Table(_) => true,
            Diffusion::Separable { time_amplitude, .. } => *time_amplitude == 0.0,
            Diffusion::Function(_) => false,
        }
    }

    /// Lower bound implied by the parameters, when one is known in closed form.
    pub fn natural_lower_bound(&self) -> Option<f64> {
        match self {
            Diffusion::Constant(v) => Some(*v),
            Diffusion::Separable {
                base,
                time_amplitude,
                space_amplitude,
                ..
            } => Some(base * (1.0 - time_amplitude.abs()) * (1.0 + space_amplitude.min(0.0))),
            Diffusion::Table(t) => Some(t.iter().copied().fold(f64::INFINITY, f64::min)),
            Diffusion::Function(_) => None,
        }
    }

    /// Element samples at time t (midpoint rule in space).
    pub fn element_samples(&self, mesh: &SpatialDiscretization, t: f64) -> Result<Vec<f64>> {
        let dim = mesh.dimension();
        let ext = mesh.extents();
        match self {
            Diffusion::Constant(v) => Ok(vec![*v; mesh.elements().len()]),
            Diffusion::Separable {
                base,
                time_amplitude,
                space_amplitude,
                period,
            } => {
                let tf = 1.0 + time_amplitude * (2.0 * PI * t / period).sin();
                Ok(mesh
                    .elements()
                    .iter()
                    .map(|e| {
                        let s: f64 = (0..dim).map(|d| (PI * e.centroid[d] / ext[d]).sin()).product();
                        base * tf * (1.0 + space_amplitude * s)
                    })
                    .collect())
            }
            Diffusion::Table(tab) => {
                if tab.len() != mesh.elements().len() {
                    return Err(Error::config(format!(
                        "diffusion table has {} values but the mesh has {} elements",
                        tab.len(),
                        mesh.elements().len()
                    )));
                }
                Ok(tab.clone())
            }
            Diffusion::Function(f) => Ok(mesh
                .elements()
                .iter()
                .map(|e| f(t, &e.centroid[..dim]))
                .collect()),
        }
    }
}

/// Check H(a) on a set of element samples.
pub fn check_diffusion_samples(samples: &[f64], a0: f64, t: f64) -> Result<()> {
    if !(a0 > 0.0) {
        return Err(Error::hypothesis("H(a)", format!("a₀ = {a0} is not positive")));
    }
    if let Some((e, v)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= a0) || !v.is_finite())
    {
        return Err(Error::hypothesis(
            "H(a)",
            format!("a(t = {t}) = {v} < a₀ = {a0} at the quadrature point of element {e}"),
        ));
    }
    Ok(())
}

/// Time profile of a forcing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Temporal {
    Sin,
    Cos,
}

/// amplitude · T(2π·frequency·t/b) · Π_d sin(k_d π z_d / l_d)
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMode {
    pub amplitude: f64,
    pub wavenumbers: Vec<u32>,
    pub temporal: Temporal,
    pub frequency: f64,
}

impl FourierMode {
    pub fn spatial(&self, z: &[f64], extents: &[f64]) -> f64 {
        self.wavenumbers
            .iter()
            .zip(z)
            .zip(extents)
            .map(|((&k, &zd), &l)| (k as f64 * PI * zd / l).sin())
            .product()
    }

    pub fn temporal_factor(&self, t: f64, period: f64) -> f64 {
        let arg = 2.0 * PI * self.frequency * t / period;
        match self.temporal {
            Temporal::Sin => arg.sin(),
            Temporal::Cos => arg.cos(),
        }
    }
}

/// Right-hand side f(t) ∈ X*.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    Fourier(Vec<FourierMode>),
    /// Covectors at increasing times, linearly interpolated in between.
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
enum CompiledForcing {
    Zero,
    Fourier(Vec<(FourierMode, Vec<f64>)>),
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl CompiledForcing {
    fn new(forcing: &Forcing, mesh: &SpatialDiscretization) -> Result<Self> {
        let n = mesh.dof_count();
        match forcing {
            Forcing::Zero => Ok(CompiledForcing::Zero),
            Forcing::Fourier(modes) => {
                let mut out = Vec::with_capacity(modes.len());
                for m in modes {
                    if m.wavenumbers.len() != mesh.dimension() {
                        return Err(Error::config(format!(
                            "forcing mode needs {} wavenumbers, got {}",
                            mesh.dimension(),
                            m.wavenumbers.len()
                        )));
                    }
                    let ext = mesh.extents().to_vec();
                    let load = mesh.load_vector(|z| m.spatial(z, &ext));
                    out.push((m.clone(), load));
                }
                Ok(CompiledForcing::Fourier(out))
            }
            Forcing::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::config("forcing table needs one row per time"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config("forcing table times must increase"));
                }
                for row in values {
                    if row.len() != n {
                        return Err(Error::config(format!(
                            "forcing table rows need {n} entries, got {}",
                            row.len()
                        )));
                    }
                }
                Ok(CompiledForcing::Table {
                    times: times.clone(),
                    values: values.clone(),
                })
            }
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, CompiledForcing::Zero)
    }

    fn eval(&self, t: f64, period: f64, n: usize) -> Vec<f64> {
        match self {
            CompiledForcing::Zero => vec![0.0; n],
            CompiledForcing::Fourier(modes) => {
                let mut out = vec![0.0; n];
                for (m, load) in modes {
                    let c = m.amplitude * m.temporal_factor(t, period);
                    linalg::axpy(c, load, &mut out);
                }
                out
            }
            CompiledForcing::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    return values[0].clone();
                }
                if k == times.len() {
                    return values[k - 1].clone();
                }
                let (t0, t1) = (times[k - 1], times[k]);
                if t == t0 {
                    return values[k - 1].clone();
                }
                let s = (t - t0) / (t1 - t0);
                values[k - 1]
                    .iter()
                    .zip(&values[k])
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect()
            }
        }
    }
}

/// Constants of the growth and coercivity conditions
/// ‖v‖_* ≤ c₁ + c₂‖y‖^{p-1} and ⟨v, y⟩ ≥ c₃‖y‖^p − c₄ for v ∈ A(t, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub p: f64,
    /// Relative coercivity loss caused by the convection term.
    pub convection_defect: f64,
}

/// Everything needed to evaluate A(t, ·) on a fixed mesh.
#[derive(Debug, Clone)]
pub struct InclusionOperator {
    mesh: Arc<SpatialDiscretization>,
    ops: Arc<OperatorSet>,
    diffusion: Diffusion,
    a0: f64,
    convection: bool,
    g: ConvexTerm,
    forcing: CompiledForcing,
    horizon: f64,
    static_stiffness: Option<SparseMatrix>,
    constants: GrowthConstants,
}

/// Builder input for [`InclusionOperator`].
#[derive(Debug, Clone)]
pub struct OperatorData {
    pub diffusion: Diffusion,
    pub a0: f64,
    pub convection: bool,
    pub g: ConvexTerm,
    pub forcing: Forcing,
    pub horizon: f64,
}

impl InclusionOperator {
    pub fn new(
        mesh: Arc<SpatialDiscretization>,
        ops: Arc<OperatorSet>,
        data: OperatorData,
    ) -> Result<Self> {
        let OperatorData {
            diffusion,
            a0,
            convection,
            g,
            forcing,
            horizon,
        } = data;
        g.validate()?;
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config(format!("horizon must be positive, got {horizon}")));
        }
        let static_stiffness = if diffusion.is_time_independent() {
            let samples = diffusion.element_samples(&mesh, 0.0)?;
            check_diffusion_samples(&samples, a0, 0.0)?;
            Some(mesh.assemble_weighted_stiffness(&samples))
        } else {
            None
        };
        let forcing = CompiledForcing::new(&forcing, &mesh)?;
        let mut op = Self {
            mesh,
            ops,
            diffusion,
            a0,
            convection,
            g,
            forcing,
            horizon,
            static_stiffness,
            constants: GrowthConstants {
                c1: 0.0,
                c2: 0.0,
                c3: 0.0,
                c4: 0.0,
                p: 2.0,
                convection_defect: 0.0,
            },
        };
        op.constants = op.estimate_constants()?;
        Ok(op)
    }

    pub fn with_constants(mut self, constants: GrowthConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn mesh(&self) -> &SpatialDiscretization {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<SpatialDiscretization> {
        Arc::clone(&self.mesh)
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn ops_arc(&self) -> Arc<OperatorSet> {
        Arc::clone(&self.ops)
    }

    pub fn dof_count(&self) -> usize {
        self.ops.dof_count()
    }

    pub fn g(&self) -> ConvexTerm {
        self.g
    }

    pub fn convection(&self) -> bool {
        self.convection
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    pub fn constants(&self) -> GrowthConstants {
        self.constants
    }

    pub fn has_forcing(&self) -> bool {
        !self.forcing.is_zero()
    }

    pub fn is_time_independent(&self) -> bool {
        self.static_stiffness.is_some()
    }

    /// Rigorous constants from the discrete embedding constants:
    /// |y|_H ≤ c_e‖y‖, |y|_{M_L} ≤ c_l‖y‖, and |Σ_k D_k y| ≤ √N |Dy|.
    fn estimate_constants(&self) -> Result<GrowthConstants> {
        let c_e = embedding_constant(&self.ops, false)?;
        let c_l = embedding_constant(&self.ops, true)?;
        let sqrt_n = (self.mesh.dimension() as f64).sqrt();
        let mut a_max = 0.0_f64;
        let grid = if self.is_time_independent() { 1 } else { 257 };
        for k in 0..grid {
            let t = self.horizon * k as f64 / grid.max(1) as f64;
            let s = self.diffusion.element_samples(&self.mesh, t)?;
            a_max = s.iter().copied().fold(a_max, f64::max);
        }
        let g_hat = self.g.growth_constant();
        let measure: f64 = self.ops.lumped_mass.iter().sum();
        let conv_bound = if self.convection { sqrt_n * c_e } else { 0.0 };
        let convection_defect = conv_bound / self.a0;
        Ok(GrowthConstants {
            c1: g_hat * c_l * measure.sqrt(),
            c2: a_max + conv_bound + g_hat * c_l * c_l,
            c3: self.a0 * (1.0 - convection_defect),
            c4: 0.0,
            p: self.g.exponent(),
            convection_defect,
        })
    }

    /// Diffusion stiffness ∫ a(t,·) Du·Dv with the H(a) check.
    pub fn stiffness(&self, t: f64) -> Result<std::borrow::Cow<'_, SparseMatrix>> {
        if let Some(s) = &self.static_stiffness {
            return Ok(std::borrow::Cow::Borrowed(s));
        }
        let samples = self.diffusion.element_samples(&self.mesh, t)?;
        check_diffusion_samples(&samples, self.a0, t)?;
        Ok(std::borrow::Cow::Owned(
            self.mesh.assemble_weighted_stiffness(&samples),
        ))
    }

    /// Convection covector ⟨sin(y) Σ_k D_k y, φ_i⟩ with sin(y) taken at
    /// element midpoints.
    pub fn convection_covector(&self, y: &[f64]) -> Vec<f64> {
        let mesh = &*self.mesh;
        let dim = mesh.dimension();
        let nv = dim + 1;
        let mut out = vec![0.0; y.len()];
        for e in mesh.elements() {
            let dofs = mesh.element_dofs(e);
            let mut mean = 0.0;
            let mut grad_sum = 0.0;
            for a in 0..nv {
                if let Some(i) = dofs[a] {
                    mean += y[i];
                    grad_sum += y[i] * e.gradients[a][..dim].iter().sum::<f64>();
                }
            }
            mean /= nv as f64;
            let c = mean.sin() * grad_sum * e.measure / nv as f64;
            for i in dofs.iter().take(nv).flatten() {
                out[*i] += c;
            }
        }
        out
    }

    /// ⟨A₁(t, y), φ_i⟩ for every interior basis function.
    pub fn eval_a1(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        linalg::check_len(y, self.dof_count())?;
        let mut out = linalg::matvec(self.stiffness(t)?.as_ref(), y);
        if self.convection {
            linalg::axpy(1.0, &self.convection_covector(y), &mut out);
        }
        Ok(out)
    }

    pub fn forcing(&self, t: f64) -> Vec<f64> {
        self.forcing.eval(t, self.horizon, self.dof_count())
    }

    /// M_L w with w the nodal Yosida selection (y - prox(λ, y))/λ.
    pub fn nodal_yosida_covector(&self, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
        y.iter()
            .zip(&self.ops.lumped_mass)
            .map(|(&yi, &l)| Ok(l * self.g.yosida(lambda, yi)?))
            .collect()
    }

    /// One selection of the forced map: A₁(t, y) + M_L w − f(t).
    pub fn eval_a_selection(&self, t: f64, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let mut out = self.eval_a1(t, y)?;
        linalg::axpy(1.0, &self.nodal_yosida_covector(y, lambda)?, &mut out);
        if !self.forcing.is_zero() {
            linalg::axpy(-1.0, &self.forcing(t), &mut out);
        }
        Ok(out)
    }

    /// Unforced selection A₁(t, y) + M_L w.
    pub fn eval_unforced_selection(&self, t: f64, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let mut out = self.eval_a1(t, y)?;
        linalg::axpy(1.0, &self.nodal_yosida_covector(y, lambda)?, &mut out);
        Ok(out)
    }

    /// Distance of `w` from the set A(t, y) − f(t), measured nodally.
    pub fn membership_residual(&self, t: f64, y: &[f64], w: &[f64]) -> Result<Membership> {
        linalg::check_len(w, self.dof_count())?;
        let mut r = linalg::sub(w, &self.eval_a1(t, y)?);
        if !self.forcing.is_zero() {
            linalg::axpy(1.0, &self.forcing(t), &mut r);
        }
        let p = self.constants.p;
        let q = p / (p - 1.0);
        let mut sum = 0.0;
        let mut max = 0.0_f64;
        for ((ri, &l), &yi) in r.iter().zip(&self.ops.lumped_mass).zip(y) {
            let d = self.g.distance_to_subdifferential(yi, ri / l);
            sum += l * d.powf(q);
            max = max.max(d);
        }
        Ok(Membership {
            norm: sum.powf(1.0 / q),
            max,
        })
    }
}

/// Pointwise distance of a covector from the discrete set A(t, y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    /// Lumped L^{p'} norm of the nodal distances.
    pub norm: f64,
    /// Largest nodal distance.
    pub max: f64,
}

//! Flat `key = value` instance files with dotted sections.
//!
//! Lines starting with `#` are comments. Unknown keys are errors. Table
//! files are resolved relative to the directory of the config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::discretization::{SpatialDiscretization, Weight};
use crate::error::{Error, Result};
use crate::operators::{ConvexTerm, Diffusion, Forcing, FourierMode, OperatorData, Temporal};
use crate::periodic_solver::{harmonic_schedule, Acceleration, SolverConfig};
use crate::verification::Instance;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant(f64),
    Indicator {
        axis: usize,
        lower: f64,
        upper: f64,
        inside: f64,
        outside: f64,
    },
    Table { path: PathBuf, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionSpec {
    Constant(f64),
    Separable {
        base: f64,
        time_amplitude: f64,
        space_amplitude: f64,
        period: f64,
    },
    Table { path: PathBuf, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Fourier(Vec<FourierMode>),
    Table {
        path: PathBuf,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Harmonic(usize),
    Geometric { ratio: f64, count: usize },
    List(Vec<f64>),
}

impl Schedule {
    pub fn epsilons(&self) -> Vec<f64> {
        match self {
            Schedule::Harmonic(n) => harmonic_schedule(*n),
            Schedule::Geometric { ratio, count } => (0..*count).map(|k| ratio.powi(k as i32)).collect(),
            Schedule::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Continuation,
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceConfig {
    pub name: String,
    pub dimension: usize,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
    pub horizon: f64,
    pub steps: usize,
    pub weight: WeightSpec,
    pub diffusion: DiffusionSpec,
    pub a0: f64,
    pub convection: bool,
    pub g: ConvexTerm,
    pub forcing: ForcingSpec,
    pub mode: Mode,
    pub schedule: Schedule,
    pub solver: SolverConfig,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub probes: usize,
    pub fourier_oracle: bool,
    pub oracle_threshold: Option<f64>,
}

/// Raw entries with the line they came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    base: PathBuf,
}

const SIMPLE_KEYS: &[&str] = &[
    "name",
    "domain.dimension",
    "domain.extents",
    "domain.cells",
    "time.horizon",
    "time.steps",
    "weight.kind",
    "weight.value",
    "weight.axis",
    "weight.lower",
    "weight.upper",
    "weight.inside",
    "weight.outside",
    "weight.table",
    "diffusion.kind",
    "diffusion.value",
    "diffusion.base",
    "diffusion.time_amplitude",
    "diffusion.space_amplitude",
    "diffusion.period",
    "diffusion.table",
    "diffusion.a0",
    "convection",
    "g.kind",
    "g.scale",
    "forcing.kind",
    "forcing.table",
    "solver.mode",
    "solver.schedule",
    "solver.step_tol",
    "solver.periodic_tol",
    "solver.max_poincare",
    "solver.acceleration",
    "solver.continuation_tol",
    "solver.p",
    "solver.max_picard",
    "solver.max_newton",
    "output.dir",
    "seed",
    "checks.probes",
    "oracle.fourier",
    "oracle.threshold",
];

const MODE_FIELDS: &[&str] = &["amplitude", "wavenumbers", "temporal", "frequency"];

/// Whether `key` names a configuration entry.
pub fn is_known_key(key: &str) -> bool {
    if SIMPLE_KEYS.contains(&key) {
        return true;
    }
    let parts: Vec<&str> = key.split('.').collect();
    parts.len() == 4
        && parts[0] == "forcing"
        && parts[1] == "mode"
        && parts[2].parse::<usize>().is_ok()
        && MODE_FIELDS.contains(&parts[3])
}

impl RawConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::config(format!("line {lineno}: expected `key = value`, got `{content}`"))
            })?;
            let key = key.trim();
            if !is_known_key(key) {
                return Err(Error::config(format!("line {lineno}: unknown key `{key}`")));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (lineno, value.trim().to_string())) {
                return Err(Error::config(format!(
                    "line {lineno}: key `{key}` already set on line {first}"
                )));
            }
        }
        Ok(Self {
            entries,
            base: base.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Replace one entry, as a sweep does.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_known_key(key) {
            return Err(Error::config(format!("unknown parameter `{key}`")));
        }
        self.entries.insert(key.to_string(), (0, value.to_string()));
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    used: std::cell::RefCell<Vec<String>>,
}

fn field_error(line: usize, key: &str, msg: impl std::fmt::Display) -> Error {
    if line == 0 {
        Error::config(format!("key `{key}`: {msg}"))
    } else {
        Error::config(format!("line {line}: key `{key}`: {msg}"))
    }
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<(usize, &'a str)> {
        self.used.borrow_mut().push(key.to_string());
        self.raw.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some((line, v)) => v
                .parse::<T>()
                .map_err(|e| field_error(line, key, format!("cannot parse `{v}`: {e}"))),
            None => default.ok_or_else(|| Error::config(format!("missing required key `{key}`"))),
        }
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some(_) => self.parse(key, None).map(Some),
            None => Ok(None),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Option<Vec<T>>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|e| field_error(line, key, format!("cannot parse `{}`: {e}", s.trim())))
                })
                .collect(),
            None => default.ok_or_else(|| Error::config(format!("missing required key `{key}`"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some((line, v)) => match v {
                "on" | "true" | "yes" => Ok(true),
                "off" | "false" | "no" => Ok(false),
                _ => Err(field_error(line, key, format!("expected on/off, got `{v}`"))),
            },
            None => Ok(default),
        }
    }

    fn word(&self, key: &str, default: &str) -> (usize, String) {
        match self.raw(key) {
            Some((line, v)) => (line, v.to_string()),
            None => (0, default.to_string()),
        }
    }

    fn path(&self, key: &str) -> Result<(usize, PathBuf)> {
        match self.raw(key) {
            Some((line, v)) => {
                let p = PathBuf::from(v);
                Ok((line, if p.is_absolute() { p } else { self.raw.base.join(p) }))
            }
            None => Err(Error::config(format!("missing required key `{key}`"))),
        }
    }

    /// Keys present in the file that the chosen variants never read.
    fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        for (key, (line, _)) in &self.raw.entries {
            if !used.contains(key) {
                return Err(field_error(*line, key, "not used by the selected options"));
            }
        }
        Ok(())
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        out.push(l.parse::<f64>().map_err(|e| {
            Error::config(format!("{}:{}: cannot parse `{l}`: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

fn read_forcing_table(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with('t') {
            continue;
        }
        let nums: Vec<f64> = l
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if nums.len() < 2 {
            return Err(Error::config(format!(
                "{}:{}: expected t followed by one value per dof",
                path.display(),
                i + 1
            )));
        }
        times.push(nums[0]);
        values.push(nums[1..].to_vec());
    }
    Ok((times, values))
}

fn parse_temporal(line: usize, key: &str, v: &str) -> Result<Temporal> {
    match v {
        "sin" => Ok(Temporal::Sin),
        "cos" => Ok(Temporal::Cos),
        _ => Err(field_error(line, key, format!("expected sin or cos, got `{v}`"))),
    }
}

impl InstanceConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let r = Reader {
            raw,
            used: Default::default(),
        };
        let name = r.parse::<String>("name", Some("instance".into()))?;
        let dimension = r.parse::<usize>("domain.dimension", Some(1))?;
        let extents = r.list::<f64>("domain.extents", Some(vec![1.0; dimension]))?;
        let cells = r.list::<usize>("domain.cells", Some(vec![64; dimension]))?;
        let horizon = r.parse::<f64>("time.horizon", Some(1.0))?;
        let steps = r.parse::<usize>("time.steps", Some(100))?;

        let (line, kind) = r.word("weight.kind", "constant");
        let weight = match kind.as_str() {
            "constant" => WeightSpec::Constant(r.parse("weight.value", Some(1.0))?),
            "indicator" => WeightSpec::Indicator {
                axis: r.parse("weight.axis", Some(0))?,
                lower: r.parse("weight.lower", None)?,
                upper: r.parse("weight.upper", None)?,
                inside: r.parse("weight.inside", Some(1.0))?,
                outside: r.parse("weight.outside", Some(0.0))?,
            },
            "table" => {
                let (_, path) = r.path("weight.table")?;
                let values = read_values(&path)?;
                WeightSpec::Table { path, values }
            }
            other => {
                return Err(field_error(
                    line,
                    "weight.kind",
                    format!("expected constant, indicator or table, got `{other}`"),
                ))
            }
        };

        let (line, kind) = r.word("diffusion.kind", "constant");
        let diffusion = match kind.as_str() {
            "constant" => DiffusionSpec::Constant(r.parse("diffusion.value", Some(1.0))?),
            "separable" => DiffusionSpec::Separable {
                base: r.parse("diffusion.base", None)?,
                time_amplitude: r.parse("diffusion.time_amplitude", Some(0.0))?,
                space_amplitude: r.parse("diffusion.space_amplitude", Some(0.0))?,
                period: r.parse("diffusion.period", Some(horizon))?,
            },
            "table" => {
                let (_, path) = r.path("diffusion.table")?;
                let values = read_values(&path)?;
                DiffusionSpec::Table { path, values }
            }
            other => {
                return Err(field_error(
                    line,
                    "diffusion.kind",
                    format!("expected constant, separable or table, got `{other}`"),
                ))
            }
        };
        let natural = diffusion.to_diffusion().natural_lower_bound();
        let a0 = match r.opt::<f64>("diffusion.a0")? {
            Some(v) => v,
            None => natural.unwrap_or(f64::NAN),
        };
        let convection = r.flag("convection", false)?;

        let (line, kind) = r.word("g.kind", "zero");
        let g = match kind.as_str() {
            "zero" => ConvexTerm::Zero,
            "abs" => ConvexTerm::Abs,
            "half_square" => ConvexTerm::HalfSquare,
            "positive_part_square" => ConvexTerm::PositivePartSquare,
            "scaled_abs" => ConvexTerm::ScaledAbs(r.parse("g.scale", None)?),
            other => {
                return Err(field_error(
                    line,
                    "g.kind",
                    format!(
                        "expected zero, abs, half_square, positive_part_square or scaled_abs, got `{other}`"
                    ),
                ))
            }
        };

        let (line, kind) = r.word("forcing.kind", "zero");
        let forcing = match kind.as_str() {
            "zero" => ForcingSpec::Zero,
            "fourier" => {
                let mut indices: Vec<usize> = raw
                    .entries
                    .keys()
                    .filter_map(|k| k.strip_prefix("forcing.mode."))
                    .filter_map(|k| k.split('.').next()?.parse().ok())
                    .collect();
                indices.sort_unstable();
                indices.dedup();
                if indices.is_empty() {
                    return Err(field_error(line, "forcing.kind", "fourier needs at least one forcing.mode.N"));
                }
                let mut modes = Vec::new();
                for i in indices {
                    let key = |f: &str| format!("forcing.mode.{i}.{f}");
                    let (tl, temporal) = r.word(&key("temporal"), "sin");
                    modes.push(FourierMode {
                        amplitude: r.parse(&key("amplitude"), None)?,
                        wavenumbers: r.list(&key("wavenumbers"), None)?,
                        temporal: parse_temporal(tl, &key("temporal"), &temporal)?,
                        frequency: r.parse(&key("frequency"), Some(1.0))?,
                    });
                }
                ForcingSpec::Fourier(modes)
            }
            "table" => {
                let (_, path) = r.path("forcing.table")?;
                let (times, values) = read_forcing_table(&path)?;
                ForcingSpec::Table { path, times, values }
            }
            other => {
                return Err(field_error(
                    line,
                    "forcing.kind",
                    format!("expected zero, fourier or table, got `{other}`"),
                ))
            }
        };

        let (line, mode) = r.word("solver.mode", "continuation");
        let mode = match mode.as_str() {
            "continuation" => Mode::Continuation,
            "direct" => Mode::Direct,
            other => {
                return Err(field_error(
                    line,
                    "solver.mode",
                    format!("expected continuation or direct, got `{other}`"),
                ))
            }
        };
        let (line, sched) = r.word("solver.schedule", "harmonic 32");
        let schedule = parse_schedule(&sched).map_err(|m| field_error(line, "solver.schedule", m))?;
        let (line, acc) = r.word("solver.acceleration", "anderson 3");
        let acceleration =
            parse_acceleration(&acc).map_err(|m| field_error(line, "solver.acceleration", m))?;
        let d = SolverConfig::default();
        let solver = SolverConfig {
            steps,
            epsilons: schedule.epsilons(),
            step_tol: r.parse("solver.step_tol", Some(d.step_tol))?,
            periodic_tol: r.parse("solver.periodic_tol", Some(d.periodic_tol))?,
            max_poincare: r.parse("solver.max_poincare", Some(d.max_poincare))?,
            acceleration,
            continuation_tol: r.parse("solver.continuation_tol", Some(d.continuation_tol))?,
            p: r.parse("solver.p", Some(d.p))?,
            max_picard: r.parse("solver.max_picard", Some(d.max_picard))?,
            max_newton: r.parse("solver.max_newton", Some(d.max_newton))?,
        };

        let output_dir = r.opt::<String>("output.dir")?.map(|s| {
            let p = PathBuf::from(s);
            if p.is_absolute() {
                p
            } else {
                raw.base.join(p)
            }
        });
        let seed = r.parse("seed", Some(0u64))?;
        let probes = r.parse("checks.probes", Some(1000usize))?;
        let fourier_oracle = r.flag("oracle.fourier", false)?;
        let oracle_threshold = r.opt::<f64>("oracle.threshold")?;
        r.check_unused()?;

        let cfg = Self {
            name,
            dimension,
            extents,
            cells,
            horizon,
            steps,
            weight,
            diffusion,
            a0,
            convection,
            g,
            forcing,
            mode,
            schedule,
            solver,
            output_dir,
            seed,
            probes,
            fourier_oracle,
            oracle_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::load(path)?).map_err(|e| match e {
            Error::Config(m) if !m.starts_with(&path.display().to_string()) => {
                Error::config(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.extents.len() != self.dimension || self.cells.len() != self.dimension {
            return Err(Error::config(format!(
                "domain.extents and domain.cells need {} entries",
                self.dimension
            )));
        }
        if !self.a0.is_finite() {
            return Err(Error::config(
                "diffusion.a0 is required when no lower bound follows from the diffusion settings",
            ));
        }
        if let ForcingSpec::Fourier(modes) = &self.forcing {
            for (i, m) in modes.iter().enumerate() {
                if m.wavenumbers.len() != self.dimension {
                    return Err(Error::config(format!(
                        "forcing mode {} needs {} wavenumbers",
                        i + 1,
                        self.dimension
                    )));
                }
            }
        }
        if self.mode == Mode::Continuation || !self.solver.epsilons.is_empty() {
            self.solver.validate()?;
        }
        if self.mode == Mode::Continuation && self.solver.epsilons.is_empty() {
            return Err(Error::config("solver.schedule is empty"));
        }
        if self.probes == 0 {
            return Err(Error::config("checks.probes must be positive"));
        }
        if let Some(t) = self.oracle_threshold {
            if !(t > 0.0) {
                return Err(Error::config("oracle.threshold must be positive"));
            }
        }
        if self.fourier_oracle {
            self.fourier_parameters()?;
        }
        Ok(())
    }

    /// (a, m) for instances the Fourier oracle covers.
    pub fn fourier_parameters(&self) -> Result<(f64, f64)> {
        let a = match self.diffusion {
            DiffusionSpec::Constant(a) => a,
            _ => return Err(Error::config("oracle.fourier needs constant diffusion")),
        };
        let m = match self.weight {
            WeightSpec::Constant(m) => m,
            _ => return Err(Error::config("oracle.fourier needs constant weight")),
        };
        if !self.g.is_zero() || self.convection {
            return Err(Error::config("oracle.fourier needs g = zero and convection off"));
        }
        if !matches!(self.forcing, ForcingSpec::Fourier(_) | ForcingSpec::Zero) {
            return Err(Error::config("oracle.fourier needs Fourier forcing"));
        }
        Ok((a, m))
    }

    pub fn fourier_modes(&self) -> Vec<FourierMode> {
        match &self.forcing {
            ForcingSpec::Fourier(m) => m.clone(),
            _ => Vec::new(),
        }
    }

    pub fn mesh(&self) -> Result<Arc<SpatialDiscretization>> {
        Ok(Arc::new(SpatialDiscretization::build(
            self.dimension,
            &self.extents,
            &self.cells,
        )?))
    }

    pub fn instance(&self) -> Result<Instance> {
        let weight = match &self.weight {
            WeightSpec::Constant(v) => Weight::Constant(*v),
            WeightSpec::Indicator {
                axis,
                lower,
                upper,
                inside,
                outside,
            } => Weight::Indicator {
                axis: *axis,
                lower: *lower,
                upper: *upper,
                inside: *inside,
                outside: *outside,
            },
            WeightSpec::Table { values, .. } => Weight::Table(values.clone()),
        };
        let forcing = match &self.forcing {
            ForcingSpec::Zero => Forcing::Zero,
            ForcingSpec::Fourier(m) => Forcing::Fourier(m.clone()),
            ForcingSpec::Table { times, values, .. } => Forcing::Table {
                times: times.clone(),
                values: values.clone(),
            },
        };
        Ok(Instance {
            name: self.name.clone(),
            mesh: self.mesh()?,
            weight,
            data: OperatorData {
                diffusion: self.diffusion.to_diffusion(),
                a0: self.a0,
                convection: self.convection,
                g: self.g,
                forcing,
                horizon: self.horizon,
            },
            steps: self.steps,
            eps_probe: match self.mode {
                Mode::Continuation => self.solver.epsilons.first().copied().unwrap_or(1.0),
                Mode::Direct => 1.0,
            },
            seed: self.seed,
            probes: self.probes,
        })
    }

    /// Canonical config text; parses back to an equal value.
    pub fn echo(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        let join_f = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        kv("name", self.name.clone());
        kv("domain.dimension", self.dimension.to_string());
        kv("domain.extents", join_f(&self.extents));
        kv(
            "domain.cells",
            self.cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "),
        );
        kv("time.horizon", format!("{:?}", self.horizon));
        kv("time.steps", self.steps.to_string());
        match &self.weight {
            WeightSpec::Constant(v) => {
                kv("weight.kind", "constant".into());
                kv("weight.value", format!("{v:?}"));
            }
            WeightSpec::Indicator {
                axis,
                lower,
                upper,
                inside,
                outside,
            } => {
                kv("weight.kind", "indicator".into());
                kv("weight.axis", axis.to_string());
                kv("weight.lower", format!("{lower:?}"));
                kv("weight.upper", format!("{upper:?}"));
                kv("weight.inside", format!("{inside:?}"));
                kv("weight.outside", format!("{outside:?}"));
            }
            WeightSpec::Table { path, .. } => {
                kv("weight.kind", "table".into());
                kv("weight.table", path.display().to_string());
            }
        }
        match &self.diffusion {
            DiffusionSpec::Constant(v) => {
                kv("diffusion.kind", "constant".into());
                kv("diffusion.value", format!("{v:?}"));
            }
            DiffusionSpec::Separable {
                base,
                time_amplitude,
                space_amplitude,
                period,
            } => {
                kv("diffusion.kind", "separable".into());
                kv("diffusion.base", format!("{base:?}"));
                kv("diffusion.time_amplitude", format!("{time_amplitude:?}"));
                kv("diffusion.space_amplitude", format!("{space_amplitude:?}"));
                kv("diffusion.period", format!("{period:?}"));
            }
            DiffusionSpec::Table { path, .. } => {
                kv("diffusion.kind", "table".into());
                kv("diffusion.table", path.display().to_string());
            }
        }
        kv("diffusion.a0", format!("{:?}", self.a0));
        kv("convection", if self.convection { "on" } else { "off" }.into());
        match self.g {
            ConvexTerm::ScaledAbs(c) => {
                kv("g.kind", "scaled_abs".into());
                kv("g.scale", format!("{c:?}"));
            }
            g => kv("g.kind", g.name()),
        }
        match &self.forcing {
            ForcingSpec::Zero => kv("forcing.kind", "zero".into()),
            ForcingSpec::Fourier(modes) => {
                kv("forcing.kind", "fourier".into());
                for (i, m) in modes.iter().enumerate() {
                    let p = format!("forcing.mode.{}", i + 1);
                    kv(&format!("{p}.amplitude"), format!("{:?}", m.amplitude));
                    kv(
                        &format!("{p}.wavenumbers"),
                        m.wavenumbers.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", "),
                    );
                    kv(
                        &format!("{p}.temporal"),
                        match m.temporal {
                            Temporal::Sin => "sin",
                            Temporal::Cos => "cos",
                        }
                        .into(),
                    );
                    kv(&format!("{p}.frequency"), format!("{:?}", m.frequency));
                }
            }
            ForcingSpec::Table { path, .. } => {
                kv("forcing.kind", "table".into());
                kv("forcing.table", path.display().to_string());
            }
        }
        kv(
            "solver.mode",
            match self.mode {
                Mode::Continuation => "continuation",
                Mode::Direct => "direct",
            }
            .into(),
        );
        kv(
            "solver.schedule",
            match &self.schedule {
                Schedule::Harmonic(n) => format!("harmonic {n}"),
                Schedule::Geometric { ratio, count } => format!("geometric {ratio:?} {count}"),
                Schedule::List(v) => format!("list {}", join_f(v)),
            },
        );
        let s = &self.solver;
        kv("solver.step_tol", format!("{:?}", s.step_tol));
        kv("solver.periodic_tol", format!("{:?}", s.periodic_tol));
        kv("solver.max_poincare", s.max_poincare.to_string());
        kv(
            "solver.acceleration",
            match s.acceleration {
                Acceleration::Plain => "plain".into(),
                Acceleration::Relaxed(t) => format!("relaxed {t:?}"),
                Acceleration::Anderson(d) => format!("anderson {d}"),
            },
        );
        kv("solver.continuation_tol", format!("{:?}", s.continuation_tol));
        kv("solver.p", format!("{:?}", s.p));
        kv("solver.max_picard", s.max_picard.to_string());
        kv("solver.max_newton", s.max_newton.to_string());
        if let Some(d) = &self.output_dir {
            kv("output.dir", d.display().to_string());
        }
        kv("seed", self.seed.to_string());
        kv("checks.probes", self.probes.to_string());
        kv("oracle.fourier", if self.fourier_oracle { "on" } else { "off" }.into());
        if let Some(t) = self.oracle_threshold {
            kv("oracle.threshold", format!("{t:?}"));
        }
        o
    }
}

impl DiffusionSpec {
    pub fn to_diffusion(&self) -> Diffusion {
        match self {
            DiffusionSpec::Constant(v) => Diffusion::Constant(*v),
            DiffusionSpec::Separable {
                base,
                time_amplitude,
                space_amplitude,
                period,
            } => Diffusion::Separable {
                base: *base,
                time_amplitude: *time_amplitude,
                space_amplitude: *space_amplitude,
                period: *period,
            },
            DiffusionSpec::Table { values, .. } => Diffusion::Table(values.clone()),
        }
    }
}

fn parse_schedule(s: &str) -> std::result::Result<Schedule, String> {
    let mut it = s.split_whitespace();
    let kind = it.next().unwrap_or("");
    let rest: Vec<&str> = it.collect();
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("cannot parse `{v}`: {e}"));
    let int = |v: &str| v.parse::<usize>().map_err(|e| format!("cannot parse `{v}`: {e}"));
    match (kind, rest.as_slice()) {
        ("harmonic", [n]) => Ok(Schedule::Harmonic(int(n)?)),
        ("geometric", [r, n]) => {
            let ratio = num(r)?;
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(format!("geometric ratio must lie in (0, 1), got {ratio}"));
            }
            Ok(Schedule::Geometric {
                ratio,
                count: int(n)?,
            })
        }
        ("list", _) if !rest.is_empty() => Ok(Schedule::List(
            rest.join(" ")
                .split(',')
                .map(|v| num(v.trim()))
                .collect::<std::result::Result<_, _>>()?,
        )),
        _ => Err(format!(
            "expected `harmonic N`, `geometric RATIO N` or `list E1, E2, ...`, got `{s}`"
        )),
    }
}

fn parse_acceleration(s: &str) -> std::result::Result<Acceleration, String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.as_slice() {
        ["plain"] => Ok(Acceleration::Plain),
        ["relaxed", t] => t
            .parse()
            .map(Acceleration::Relaxed)
            .map_err(|e| format!("cannot parse `{t}`: {e}")),
        ["anderson", d] => d
            .parse()
            .map(Acceleration::Anderson)
            .map_err(|e| format!("cannot parse `{d}`: {e}")),
        _ => Err(format!("expected plain, `relaxed THETA` or `anderson DEPTH`, got `{s}`")),
    }
}

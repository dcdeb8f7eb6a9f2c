//! Run configuration: flat INI text with `[section]` headers. Keys may also
//! be written fully dotted (`model.a = 0.1`) outside any section. Unknown
//! keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::conductivity::Tensor2;
use crate::error::{BidomainError, Result};
use crate::ionic::{IonicModel, ModelVariant};

#[derive(Debug, Clone, PartialEq)]
pub enum ConductivitySpec {
    Constant(Tensor2),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    None,
    Constant,
    Cosine([usize; 2]),
    Mode(usize),
    Patch { lo: [f64; 2], hi: [f64; 2] },
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Sin,
    Cos,
    Square,
    Constant,
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityConfig {
    pub sigma_i: ConductivitySpec,
    pub sigma_e: ConductivitySpec,
    pub bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingConfig {
    pub period: f64,
    pub amplitude: f64,
    pub profile: ProfileSpec,
    pub shape: ShapeSpec,
    /// `s_e = extra_ratio · s_i`; `−1` conserves currents.
    pub extra_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Zero,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub order: usize,
    pub tol: f64,
    pub periodic_tol: f64,
    pub max_iter: usize,
    pub accel_window: usize,
    pub samples: usize,
    pub ball_guard: bool,
    pub probes: usize,
    pub ball_samples: usize,
    pub t1: Option<f64>,
    pub initial: InitialState,
    pub lattice_half_width: f64,
    pub lattice_step: f64,
    pub convergence_orders: Vec<usize>,
    pub uniqueness_tols: (f64, f64),
    pub uniqueness_states: usize,
    pub energy_steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub plots: bool,
    pub eigenvectors: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub conductivity: ConductivityConfig,
    pub model: IonicModel,
    pub forcing: ForcingConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

const KEYS: &[&str] = &[
    "grid.extents",
    "grid.counts",
    "conductivity.sigma_i",
    "conductivity.sigma_e",
    "conductivity.sigma_i_csv",
    "conductivity.sigma_e_csv",
    "conductivity.bounds",
    "model.variant",
    "model.a",
    "model.b",
    "model.k",
    "model.eps",
    "model.d",
    "forcing.period",
    "forcing.amplitude",
    "forcing.profile",
    "forcing.wavenumber",
    "forcing.mode",
    "forcing.patch_lo",
    "forcing.patch_hi",
    "forcing.profile_csv",
    "forcing.shape",
    "forcing.shape_csv",
    "forcing.extra_ratio",
    "solver.order",
    "solver.tol",
    "solver.periodic_tol",
    "solver.max_iter",
    "solver.accel_window",
    "solver.samples",
    "solver.ball_guard",
    "solver.probes",
    "solver.ball_samples",
    "solver.t1",
    "solver.initial",
    "solver.lattice_half_width",
    "solver.lattice_step",
    "solver.convergence_orders",
    "solver.uniqueness_tols",
    "solver.uniqueness_states",
    "solver.energy_steps",
    "output.directory",
    "output.plots",
    "output.eigenvectors",
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    base: PathBuf,
}

fn config_err(key: &str, line: usize, message: impl Into<String>) -> BidomainError {
    BidomainError::Config {
        key: key.to_string(),
        line,
        message: message.into(),
    }
}

impl Entries {
    fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, line_no, "unterminated section header"))?
                    .trim();
                if !KEYS.iter().any(|k| k.starts_with(&format!("{name}."))) {
                    return Err(config_err(name, line_no, "unknown section"));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(line, line_no, "expected `key = value`"))?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') && !k.starts_with(&section) && KEYS.contains(&k) {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if !KEYS.contains(&key.as_str()) {
                return Err(config_err(&key, line_no, "unknown key"));
            }
            if map.insert(key.clone(), (v.trim().to_string(), line_no)).is_some() {
                return Err(config_err(&key, line_no, "duplicate key"));
            }
        }
        Ok(Entries {
            map,
            base: base.to_path_buf(),
        })
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.1)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.0.as_str())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| config_err(key, 0, "missing required key"))
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str, v: &str, what: &str) -> Result<T> {
        v.trim()
            .parse::<T>()
            .map_err(|_| config_err(key, self.line(key), format!("expected {what}, got `{v}`")))
    }

    fn f64_or(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match (self.raw(key), default) {
            (Some(v), _) => self.parse_value(key, v, "a number"),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(config_err(key, 0, "missing required key")),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            Some(v) => self.parse_value(key, v, "a non-negative integer"),
            None => Ok(default),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            Some(v) => self.parse_value(key, v, "true or false"),
            None => Ok(default),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, v: &str, what: &str) -> Result<Vec<T>> {
        v.split(',').map(|p| self.parse_value(key, p, what)).collect()
    }

    fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            Some(v) => self.list(key, v, "a comma-separated list of numbers"),
            None => Ok(default.to_vec()),
        }
    }

    fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            Some(v) => self.list(key, v, "a comma-separated list of integers"),
            None => Ok(default.to_vec()),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() || self.base.as_os_str().is_empty() {
                p
            } else {
                self.base.join(p)
            }
        })
    }

    fn existing_path(&self, key: &str) -> Result<Option<PathBuf>> {
        match self.path(key) {
            Some(p) if !p.exists() => Err(config_err(
                key,
                self.line(key),
                format!("file {} does not exist", p.display()),
            )),
            other => Ok(other),
        }
    }

    fn range(&self, key: &str, ok: bool, message: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(config_err(key, self.line(key), message))
        }
    }
}

fn pad2<T: Copy>(v: &[T], fill: T) -> [T; 2] {
    [v.first().copied().unwrap_or(fill), v.get(1).copied().unwrap_or(fill)]
}

impl RunConfig {
    pub fn parse_str(text: &str, base: &Path) -> Result<Self> {
        let e = Entries::parse(text, base)?;

        let extents = e.list::<f64>("grid.extents", e.required("grid.extents")?, "numbers")?;
        let counts = e.list::<usize>("grid.counts", e.required("grid.counts")?, "integers")?;
        e.range(
            "grid.extents",
            (1..=2).contains(&extents.len()) && extents.iter().all(|&x| x > 0.0 && x.is_finite()),
            "need one or two positive extents",
        )?;
        e.range(
            "grid.counts",
            counts.len() == extents.len() && counts.iter().all(|&c| c >= 3),
            "need one count of at least 3 per extent",
        )?;

        let tensor = |key: &str, csv_key: &str, default: f64| -> Result<ConductivitySpec> {
            if let Some(p) = e.existing_path(csv_key)? {
                if e.raw(key).is_some() {
                    return Err(config_err(csv_key, e.line(csv_key), format!("conflicts with `{key}`")));
                }
                return Ok(ConductivitySpec::Csv(p));
            }
            let vals = e.f64_list_or(key, &[default])?;
            let t = match vals.as_slice() {
                [s] => Tensor2::isotropic(*s),
                [s11, s12, s22] => Tensor2::symmetric(*s11, *s12, *s22),
                _ => return Err(config_err(key, e.line(key), "expected 1 or 3 values (s11,s12,s22)")),
            };
            Ok(ConductivitySpec::Constant(t))
        };
        let bounds = match e.raw("conductivity.bounds") {
            Some(v) => {
                let b = e.list::<f64>("conductivity.bounds", v, "numbers")?;
                e.range(
                    "conductivity.bounds",
                    b.len() == 2 && b[0] > 0.0 && b[0] <= b[1],
                    "expected `lo, hi` with 0 < lo <= hi",
                )?;
                Some((b[0], b[1]))
            }
            None => None,
        };
        let conductivity = ConductivityConfig {
            sigma_i: tensor("conductivity.sigma_i", "conductivity.sigma_i_csv", 1.0)?,
            sigma_e: tensor("conductivity.sigma_e", "conductivity.sigma_e_csv", 1.0)?,
            bounds,
        };

        let variant: ModelVariant = {
            let v = e.required("model.variant")?;
            v.parse()
                .map_err(|m: String| config_err("model.variant", e.line("model.variant"), m))?
        };
        let needs_b = variant != ModelVariant::FitzHughNagumo;
        let model = IonicModel {
            variant,
            a: e.f64_or("model.a", None)?,
            b: e.f64_or("model.b", if needs_b { None } else { Some(1.0) })?,
            k: e.f64_or("model.k", None)?,
            eps: e.f64_or("model.eps", None)?,
            d: e.f64_or(
                "model.d",
                if variant == ModelVariant::AlievPanfilov { None } else { Some(0.0) },
            )?,
        };
        if let Err(BidomainError::InvalidParameter { name, reason }) = model.validate() {
            return Err(config_err(&name, e.line(&name), reason));
        }

        let period = e.f64_or("forcing.period", None)?;
        e.range("forcing.period", period > 0.0 && period.is_finite(), "must be positive")?;
        let profile = match e.raw("forcing.profile").unwrap_or("none") {
            "none" => ProfileSpec::None,
            "constant" => ProfileSpec::Constant,
            "cosine" => ProfileSpec::Cosine(pad2(&e.usize_list_or("forcing.wavenumber", &[1])?, 0)),
            "mode" => ProfileSpec::Mode(e.usize_or("forcing.mode", 1)?),
            "patch" => ProfileSpec::Patch {
                lo: pad2(&e.f64_list_or("forcing.patch_lo", &[0.0])?, 0.0),
                hi: pad2(&e.f64_list_or("forcing.patch_hi", &[0.25])?, f64::INFINITY),
            },
            "csv" => ProfileSpec::Csv(
                e.existing_path("forcing.profile_csv")?
                    .ok_or_else(|| config_err("forcing.profile_csv", 0, "required for profile = csv"))?,
            ),
            other => {
                return Err(config_err(
                    "forcing.profile",
                    e.line("forcing.profile"),
                    format!("unknown profile `{other}` (none, constant, cosine, mode, patch, csv)"),
                ))
            }
        };
        let shape = match e.raw("forcing.shape").unwrap_or("sin") {
            "sin" => ShapeSpec::Sin,
            "cos" => ShapeSpec::Cos,
            "square" => ShapeSpec::Square,
            "constant" => ShapeSpec::Constant,
            "csv" => ShapeSpec::Csv(
                e.existing_path("forcing.shape_csv")?
                    .ok_or_else(|| config_err("forcing.shape_csv", 0, "required for shape = csv"))?,
            ),
            other => {
                return Err(config_err(
                    "forcing.shape",
                    e.line("forcing.shape"),
                    format!("unknown shape `{other}` (sin, cos, square, constant, csv)"),
                ))
            }
        };
        let forcing = ForcingConfig {
            period,
            amplitude: e.f64_or("forcing.amplitude", Some(0.0))?,
            profile,
            shape,
            extra_ratio: e.f64_or("forcing.extra_ratio", Some(-1.0))?,
        };

        let positive = |key: &str, v: f64| e.range(key, v > 0.0 && v.is_finite(), "must be positive");
        let tols = e.f64_list_or("solver.uniqueness_tols", &[1e-6, 1e-7])?;
        e.range(
            "solver.uniqueness_tols",
            tols.len() == 2 && tols.iter().all(|&t| t > 0.0) && tols[0] != tols[1],
            "expected two distinct positive tolerances",
        )?;
        let initial = match e.raw("solver.initial") {
            None | Some("zero") => InitialState::Zero,
            Some(_) => InitialState::File(e.existing_path("solver.initial")?.unwrap()),
        };
        let solver = SolverConfig {
            order: e.usize_or("solver.order", 16)?,
            tol: e.f64_or("solver.tol", Some(1e-11))?,
            periodic_tol: e.f64_or("solver.periodic_tol", Some(1e-8))?,
            max_iter: e.usize_or("solver.max_iter", 500)?,
            accel_window: e.usize_or("solver.accel_window", 5)?,
            samples: e.usize_or("solver.samples", 200)?,
            ball_guard: e.bool_or("solver.ball_guard", true)?,
            probes: e.usize_or("solver.probes", 100)?,
            ball_samples: e.usize_or("solver.ball_samples", 64)?,
            t1: match e.raw("solver.t1") {
                Some(_) => Some(e.f64_or("solver.t1", None)?),
                None => None,
            },
            initial,
            lattice_half_width: e.f64_or("solver.lattice_half_width", Some(50.0))?,
            lattice_step: e.f64_or("solver.lattice_step", Some(0.05))?,
            convergence_orders: e.usize_list_or("solver.convergence_orders", &[8, 16, 32, 64])?,
            uniqueness_tols: (tols[0], tols[1]),
            uniqueness_states: e.usize_or("solver.uniqueness_states", 5)?,
            energy_steps: e.usize_list_or("solver.energy_steps", &[50, 100, 200, 400, 800])?,
        };
        positive("solver.tol", solver.tol)?;
        positive("solver.periodic_tol", solver.periodic_tol)?;
        positive("solver.lattice_half_width", solver.lattice_half_width)?;
        positive("solver.lattice_step", solver.lattice_step)?;
        e.range("solver.order", solver.order >= 1, "must be at least 1")?;
        e.range("solver.samples", solver.samples >= 2, "must be at least 2")?;
        e.range("solver.probes", solver.probes >= 10, "must be at least 10")?;
        if let Some(t1) = solver.t1 {
            positive("solver.t1", t1)?;
        }

        let output = OutputConfig {
            directory: e.path("output.directory").unwrap_or_else(|| PathBuf::from("out")),
            plots: e.bool_or("output.plots", true)?,
            eigenvectors: e.bool_or("output.eigenvectors", false)?,
        };

        Ok(RunConfig {
            grid: GridConfig { extents, counts },
            conductivity,
            model,
            forcing,
            solver,
            output,
        })
    }

    /// INI text that parses back to this configuration. Paths are written as
    /// resolved, so they are absolute whenever the config came from a file.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let list = |v: &[String]| v.join(", ");
        let f = |x: f64| format!("{x:?}");
        let fl = |v: &[f64]| list(&v.iter().map(|x| f(*x)).collect::<Vec<_>>());
        let ul = |v: &[usize]| list(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        let tensor = |t: &ConductivitySpec, key: &str| match t {
            ConductivitySpec::Constant(t) => format!("{key} = {}, {}, {}\n", f(t.s11), f(t.s12), f(t.s22)),
            ConductivitySpec::Csv(p) => format!("{key}_csv = {}\n", p.display()),
        };
        let _ = writeln!(s, "[grid]\nextents = {}\ncounts = {}\n", fl(&self.grid.extents), ul(&self.grid.counts));
        s.push_str("[conductivity]\n");
        s.push_str(&tensor(&self.conductivity.sigma_i, "sigma_i"));
        s.push_str(&tensor(&self.conductivity.sigma_e, "sigma_e"));
        if let Some((lo, hi)) = self.conductivity.bounds {
            let _ = writeln!(s, "bounds = {}, {}", f(lo), f(hi));
        }
        let m = &self.model;
        let _ = writeln!(
            s,
            "\n[model]\nvariant = {}\na = {}\nb = {}\nk = {}\neps = {}\nd = {}\n",
            m.variant,
            f(m.a),
            f(m.b),
            f(m.k),
            f(m.eps),
            f(m.d)
        );
        let fc = &self.forcing;
        let _ = writeln!(
            s,
            "[forcing]\nperiod = {}\namplitude = {}\nextra_ratio = {}",
            f(fc.period),
            f(fc.amplitude),
            f(fc.extra_ratio)
        );
        match &fc.profile {
            ProfileSpec::None => s.push_str("profile = none\n"),
            ProfileSpec::Constant => s.push_str("profile = constant\n"),
            ProfileSpec::Cosine(w) => {
                let _ = writeln!(s, "profile = cosine\nwavenumber = {}", ul(&w[..self.grid.extents.len()]));
            }
            ProfileSpec::Mode(j) => {
                let _ = writeln!(s, "profile = mode\nmode = {j}");
            }
            ProfileSpec::Patch { lo, hi } => {
                let d = self.grid.extents.len();
                let _ = writeln!(s, "profile = patch\npatch_lo = {}\npatch_hi = {}", fl(&lo[..d]), fl(&hi[..d]));
            }
            ProfileSpec::Csv(p) => {
                let _ = writeln!(s, "profile = csv\nprofile_csv = {}", p.display());
            }
        }
        match &fc.shape {
            ShapeSpec::Sin => s.push_str("shape = sin\n"),
            ShapeSpec::Cos => s.push_str("shape = cos\n"),
            ShapeSpec::Square => s.push_str("shape = square\n"),
            ShapeSpec::Constant => s.push_str("shape = constant\n"),
            ShapeSpec::Csv(p) => {
                let _ = writeln!(s, "shape = csv\nshape_csv = {}", p.display());
            }
        }
        let v = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\norder = {}\ntol = {}\nperiodic_tol = {}\nmax_iter = {}\naccel_window = {}\nsamples = {}\nball_guard = {}\nprobes = {}\nball_samples = {}",
            v.order,
            f(v.tol),
            f(v.periodic_tol),
            v.max_iter,
            v.accel_window,
            v.samples,
            v.ball_guard,
            v.probes,
            v.ball_samples
        );
        if let Some(t1) = v.t1 {
            let _ = writeln!(s, "t1 = {}", f(t1));
        }
        match &v.initial {
            InitialState::Zero => s.push_str("initial = zero\n"),
            InitialState::File(p) => {
                let _ = writeln!(s, "initial = {}", p.display());
            }
        }
        let _ = writeln!(
            s,
            "lattice_half_width = {}\nlattice_step = {}\nconvergence_orders = {}\nuniqueness_tols = {}, {}\nuniqueness_states = {}\nenergy_steps = {}",
            f(v.lattice_half_width),
            f(v.lattice_step),
            ul(&v.convergence_orders),
            f(v.uniqueness_tols.0),
            f(v.uniqueness_tols.1),
            v.uniqueness_states,
            ul(&v.energy_steps)
        );
        let o = &self.output;
        let _ = writeln!(
            s,
            "\n[output]\ndirectory = {}\nplots = {}\neigenvectors = {}",
            o.directory.display(),
            o.plots,
            o.eigenvectors
        );
        s
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BidomainError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    let base = std::fs::canonicalize(parent.unwrap_or(Path::new(".")))?;
    RunConfig::parse_str(&text, &base)
}

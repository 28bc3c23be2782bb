//! Run configuration: a TOML file with one section per concern.
//!
//! ```toml
//! seed = 7
//!
//! [equation]
//! variant = "derivative_of_square"
//! j = 1
//! k = 1
//! c = 1.0
//!
//! [grid]
//! half_period = 25.0
//! points = 256
//!
//! [time]
//! horizon = 0.5
//! dt = 0.01
//!
//! [data]
//! kind = "gaussian"
//! amplitude = 0.1
//!
//! [experiment]
//! kind = "solve"
//!
//! [output]
//! dir = "out/solve"
//! json = true
//! ```
//!
//! Unknown keys are rejected everywhere. [`RunConfig::resolve`] re-checks
//! every precondition of the modules involved before anything runs.

use std::path::{Path, PathBuf};

use dispersion_core::ensemble::{Ensemble, Generator, Packet, Profile};
use dispersion_core::estimates::{EquivalenceConfig, LabConfig, LocalizedGroup, Resolution, Scan};
use dispersion_core::evolution::{Coefficient, EquationSpec};
use dispersion_core::illposed::{default_n_values, WitnessConfig, WitnessTarget};
use dispersion_core::solver::{NormMode, SolveConfig};
use dispersion_core::{SpectralField, TorusGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{at_key, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub equation: Option<EquationConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum EquationConfig {
    Generic {
        j: u32,
        coeffs: Vec<Coefficient>,
    },
    /// `c·∂_x^k(u²)` on top of the `∂_x^{2j+1}` group.
    DerivativeOfSquare {
        j: u32,
        k: u32,
        #[serde(default = "unit")]
        c: f64,
    },
    HoBo {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        eps: f64,
    },
    HoIlw {
        a1: f64,
        a2: f64,
        b: f64,
        c: f64,
        d: f64,
        h: f64,
        eps: f64,
    },
}

impl EquationConfig {
    pub fn spec(&self) -> dispersion_core::Result<EquationSpec> {
        let spec = match self {
            Self::Generic { j, coeffs } => EquationSpec::generic(*j, coeffs.clone())?,
            Self::DerivativeOfSquare { j, k, c } => EquationSpec::derivative_of_square(*j, *k, *c)?,
            Self::HoBo { a, b, c, d, eps } => EquationSpec::HoBo { a: *a, b: *b, c: *c, d: *d, eps: *eps },
            Self::HoIlw { a1, a2, b, c, d, h, eps } => {
                EquationSpec::HoIlw { a1: *a1, a2: *a2, b: *b, c: *c, d: *d, h: *h, eps: *eps }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// `L` in `[−L, L)`.
    pub half_period: f64,
    /// `M`, a power of two.
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub dt: f64,
}

/// Initial data sampled on the configured grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Zero,
    /// `a·exp(−((x−c)/w)²)`.
    Gaussian {
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "unit")]
        width: f64,
    },
    /// `2κ²sech²(κ(x−c))`.
    Soliton {
        kappa: f64,
        #[serde(default)]
        center: f64,
    },
    /// `a·e^{iNx}e^{−((x−c)/σ)²}`.
    Packet {
        n: f64,
        sigma: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// `a·e^{iπkx/L}`.
    PureMode {
        mode: i64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
}

impl DataConfig {
    pub fn field(&self, grid: &TorusGrid<f64>) -> dispersion_core::Result<SpectralField<f64>> {
        match *self {
            Self::Zero => Ok(SpectralField::zeros(grid)),
            Self::Gaussian { amplitude, center, width } => {
                if !(width > 0.0) {
                    return Err(dispersion_core::Error::Parameter {
                        name: "width".into(),
                        reason: "must be positive".into(),
                    });
                }
                SpectralField::from_real_fn(grid, |x| amplitude * (-((x - center) / width).powi(2)).exp())
            }
            Self::Soliton { kappa, center } => SpectralField::from_real_fn(grid, |x| {
                let s = 1.0 / (kappa * (x - center)).cosh();
                2.0 * kappa * kappa * s * s
            }),
            Self::Packet { n, sigma, center, amplitude } => {
                if !(sigma > 0.0) {
                    return Err(dispersion_core::Error::Parameter {
                        name: "sigma".into(),
                        reason: "must be positive".into(),
                    });
                }
                let packet = Packet { center, amp_re: amplitude, ..Packet::new(n, sigma) };
                Profile::single(packet).field(grid)
            }
            Self::PureMode { mode, amplitude } => SpectralField::pure_mode(grid, mode, Complex64::new(amplitude, 0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Solve {
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_norm")]
        norm: NormMode,
        #[serde(default = "unit")]
        c_hat: f64,
        /// Number of evenly spaced time slices written to the trajectory file.
        #[serde(default = "default_snapshots")]
        snapshots: usize,
    },
    Illposed {
        #[serde(default)]
        s: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "unit")]
        t: f64,
        #[serde(default)]
        real_valued: bool,
        #[serde(default)]
        n_values: Option<Vec<f64>>,
        #[serde(default)]
        outer_nodes: Option<usize>,
        #[serde(default)]
        inner_nodes: Option<usize>,
    },
    Verify(Box<VerifyConfig>),
    Norms {
        #[serde(default)]
        sobolev: Vec<f64>,
        #[serde(default)]
        besov: Vec<BesovConfig>,
        #[serde(default)]
        weighted_sobolev: Vec<u32>,
    },
    Frechet {
        /// Second direction; the first is `[data]`.
        psi: DataConfig,
        #[serde(default = "default_deltas")]
        deltas: Vec<f64>,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Solve { .. } => "solve",
            Self::Illposed { .. } => "illposed",
            Self::Verify(_) => "verify",
            Self::Norms { .. } => "norms",
            Self::Frechet { .. } => "frechet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovConfig {
    pub s: f64,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default)]
    pub weighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    Bernstein,
    Smoothing,
    Maximal,
    FreeGroup,
    Localized,
    Bilinear,
    BilinearWitness,
    Equivalence,
}

impl Estimate {
    pub const ALL: [Estimate; 8] = [
        Self::Bernstein,
        Self::Smoothing,
        Self::Maximal,
        Self::FreeGroup,
        Self::Localized,
        Self::Bilinear,
        Self::BilinearWitness,
        Self::Equivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bernstein => "bernstein",
            Self::Smoothing => "smoothing",
            Self::Maximal => "maximal",
            Self::FreeGroup => "free_group",
            Self::Localized => "localized",
            Self::Bilinear => "bilinear",
            Self::BilinearWitness => "bilinear_witness",
            Self::Equivalence => "equivalence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub generator: Generator,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub estimate: Estimate,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    /// Dyadic levels for `bernstein` and `localized`.
    #[serde(default)]
    pub levels: Option<Vec<u32>>,
    /// Derivative order of the Bernstein check.
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub scan: Option<Scan>,
    #[serde(default)]
    pub group: Option<LocalizedGroup>,
    #[serde(default)]
    pub lab: Option<LabConfig>,
    #[serde(default)]
    pub resolution: Option<Resolution>,
    /// High frequencies of `bilinear_witness`.
    #[serde(default)]
    pub n_values: Option<Vec<f64>>,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub equivalence: Option<EquivalenceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Also write `summary.json`.
    #[serde(default)]
    pub json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), json: false }
    }
}

fn unit() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-10
}
fn default_norm() -> NormMode {
    NormMode::Xt
}
fn default_snapshots() -> usize {
    11
}
fn default_epsilon() -> f64 {
    0.5
}
fn default_deltas() -> Vec<f64> {
    vec![1e-2, 1e-3]
}
fn default_q() -> u32 {
    2
}
fn default_order() -> u32 {
    1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A configuration with every precondition checked and every object built.
#[derive(Debug, Clone)]
pub enum Job {
    Solve { spec: EquationSpec, u0: SpectralField<f64>, cfg: SolveConfig, snapshots: usize },
    Illposed { template: WitnessConfig, n_values: Vec<f64> },
    Verify(VerifyJob),
    Norms { field: SpectralField<f64>, sobolev: Vec<f64>, besov: Vec<BesovConfig>, weighted_sobolev: Vec<u32> },
    Frechet { spec: EquationSpec, phi: SpectralField<f64>, psi: SpectralField<f64>, cfg: SolveConfig, deltas: Vec<f64> },
}

#[derive(Debug, Clone)]
pub enum VerifyJob {
    Bernstein {
        ensemble: Ensemble,
        order: u32,
        levels: Vec<u32>,
        resolution: Resolution,
    },
    FreeGroup {
        estimate: Estimate,
        spec: EquationSpec,
        ensemble: Ensemble,
        scan: Scan,
        lab: LabConfig,
    },
    Localized {
        spec: EquationSpec,
        ensemble: Ensemble,
        levels: Vec<u32>,
        group: Option<LocalizedGroup>,
        lab: LabConfig,
    },
    Bilinear {
        spec: EquationSpec,
        ensemble: Ensemble,
        lab: LabConfig,
    },
    BilinearWitness {
        template: WitnessConfig,
        n_values: Vec<f64>,
    },
    Equivalence {
        ensemble: Ensemble,
        cfg: EquivalenceConfig,
    },
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    fn equation(&self) -> Result<EquationSpec, CliError> {
        let eq = self.equation.as_ref().ok_or_else(|| missing("equation", self.experiment.name()))?;
        eq.spec().map_err(at_key("equation", self.experiment.name()))
    }

    fn grid(&self) -> Result<TorusGrid<f64>, CliError> {
        let g = self.grid.ok_or_else(|| missing("grid", self.experiment.name()))?;
        TorusGrid::new(g.half_period, g.points).map_err(at_key("grid", self.experiment.name()))
    }

    fn time(&self) -> Result<TimeConfig, CliError> {
        self.time.ok_or_else(|| missing("time", self.experiment.name()))
    }

    fn data(&self, grid: &TorusGrid<f64>) -> Result<SpectralField<f64>, CliError> {
        let d = self.data.as_ref().ok_or_else(|| missing("data", self.experiment.name()))?;
        d.field(grid).map_err(at_key("data", self.experiment.name()))
    }

    fn solve_config(&self, max_iter: usize, tol: f64, norm: NormMode, c_hat: f64) -> Result<SolveConfig, CliError> {
        let t = self.time()?;
        let cfg = SolveConfig { horizon: t.horizon, dt: t.dt, max_iter, tol, norm, c_hat };
        cfg.validate().map_err(at_key("time", self.experiment.name()))?;
        cfg.time_grid::<f64>().map_err(at_key("time", self.experiment.name()))?;
        Ok(cfg)
    }

    /// Witness target implied by `[equation]`.
    fn witness_target(&self, s: f64) -> Result<WitnessTarget, CliError> {
        let eq = self.equation.as_ref().ok_or_else(|| missing("equation", self.experiment.name()))?;
        match eq {
            EquationConfig::DerivativeOfSquare { j, k, .. } => Ok(WitnessTarget::Generic { j: *j, k: *k, s }),
            EquationConfig::HoBo { .. } | EquationConfig::HoIlw { .. } => {
                Ok(WitnessTarget::Nonlocal { equation: self.equation()?, s })
            }
            EquationConfig::Generic { .. } => {
                Err(CliError::invalid("equation.variant", "the witness needs derivative_of_square, ho_bo or ho_ilw"))
            }
        }
    }

    /// Checks every precondition and builds the job.
    pub fn resolve(&self) -> Result<Job, CliError> {
        let name = self.experiment.name();
        match &self.experiment {
            Experiment::Solve { max_iter, tol, norm, c_hat, snapshots } => {
                let spec = self.equation()?;
                let grid = self.grid()?;
                let u0 = self.data(&grid)?;
                let cfg = self.solve_config(*max_iter, *tol, *norm, *c_hat)?;
                if *snapshots < 2 {
                    return Err(CliError::invalid("experiment.snapshots", "need at least 2 time slices"));
                }
                Ok(Job::Solve { spec, u0, cfg, snapshots: *snapshots })
            }
            Experiment::Illposed { s, epsilon, t, real_valued, n_values, outer_nodes, inner_nodes } => {
                let mut template = WitnessConfig::new(self.witness_target(*s)?, 16.0);
                template.epsilon = *epsilon;
                template.t = *t;
                template.real_valued = *real_valued;
                if let Some(n) = outer_nodes {
                    template.outer_nodes = *n;
                }
                if let Some(n) = inner_nodes {
                    template.inner_nodes = *n;
                }
                let n_values = n_values.clone().unwrap_or_else(default_n_values);
                check_witness(&template, &n_values, 4, name)?;
                Ok(Job::Illposed { template, n_values })
            }
            Experiment::Verify(v) => self.resolve_verify(v).map(Job::Verify),
            Experiment::Norms { sobolev, besov, weighted_sobolev } => {
                if sobolev.is_empty() && besov.is_empty() && weighted_sobolev.is_empty() {
                    return Err(CliError::invalid(
                        "experiment",
                        "norms needs at least one of sobolev, besov, weighted_sobolev",
                    ));
                }
                if let Some(s) = sobolev.iter().chain(besov.iter().map(|b| &b.s)).find(|s| !s.is_finite()) {
                    return Err(CliError::invalid("experiment.sobolev", format!("smoothness {s} is not finite")));
                }
                for b in besov {
                    dispersion_core::Summation::from_q(b.q).map_err(at_key("experiment.besov.q", name))?;
                }
                if weighted_sobolev.contains(&0) {
                    return Err(CliError::invalid("experiment.weighted_sobolev", "k must be at least 1"));
                }
                let grid = self.grid()?;
                let field = self.data(&grid)?;
                Ok(Job::Norms {
                    field,
                    sobolev: sobolev.clone(),
                    besov: besov.clone(),
                    weighted_sobolev: weighted_sobolev.clone(),
                })
            }
            Experiment::Frechet { psi, deltas, max_iter, tol } => {
                let spec = self.equation()?;
                let grid = self.grid()?;
                let phi = self.data(&grid)?;
                let psi = psi.field(&grid).map_err(at_key("experiment.psi", name))?;
                if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
                    return Err(CliError::invalid("experiment.deltas", "need at least one positive δ"));
                }
                let cfg = self.solve_config(*max_iter, *tol, NormMode::Xt, 1.0)?;
                Ok(Job::Frechet { spec, phi, psi, cfg, deltas: deltas.clone() })
            }
        }
    }

    fn ensemble(&self, v: &VerifyConfig) -> Result<Ensemble, CliError> {
        let e = v
            .ensemble
            .as_ref()
            .ok_or_else(|| missing("experiment.ensemble", &format!("verify {}", v.estimate.name())))?;
        let ensemble = Ensemble::new(e.generator.clone(), e.count, self.seed);
        ensemble.validate().map_err(at_key("experiment.ensemble", "verify"))?;
        Ok(ensemble)
    }

    fn lab(&self, v: &VerifyConfig) -> Result<LabConfig, CliError> {
        let lab = v.lab.clone().ok_or_else(|| missing("experiment.lab", &format!("verify {}", v.estimate.name())))?;
        lab.validate().map_err(at_key("experiment.lab", "verify"))?;
        Ok(lab)
    }

    fn resolve_verify(&self, v: &VerifyConfig) -> Result<VerifyJob, CliError> {
        let what = format!("verify {}", v.estimate.name());
        let levels = || {
            let levels = v.levels.clone().ok_or_else(|| missing("experiment.levels", &what))?;
            if levels.is_empty() {
                return Err(CliError::invalid("experiment.levels", "must not be empty"));
            }
            Ok(levels)
        };
        Ok(match v.estimate {
            Estimate::Bernstein => VerifyJob::Bernstein {
                ensemble: self.ensemble(v)?,
                order: v.order,
                levels: levels()?,
                resolution: v.resolution.unwrap_or_default(),
            },
            Estimate::Smoothing | Estimate::Maximal | Estimate::FreeGroup => {
                let scan = v.scan.clone().ok_or_else(|| missing("experiment.scan", &what))?;
                let values = match &scan {
                    Scan::Dilation { factors } => factors,
                    Scan::Modulation { carriers } => carriers,
                };
                if values.len() < 2 || values.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(CliError::invalid("experiment.scan", "need at least 2 positive scan values"));
                }
                VerifyJob::FreeGroup {
                    estimate: v.estimate,
                    spec: self.equation()?,
                    ensemble: self.ensemble(v)?,
                    scan,
                    lab: self.lab(v)?,
                }
            }
            Estimate::Localized => VerifyJob::Localized {
                spec: self.equation()?,
                ensemble: self.ensemble(v)?,
                levels: levels()?,
                group: v.group,
                lab: self.lab(v)?,
            },
            Estimate::Bilinear => {
                VerifyJob::Bilinear { spec: self.equation()?, ensemble: self.ensemble(v)?, lab: self.lab(v)? }
            }
            Estimate::BilinearWitness => {
                let mut template = WitnessConfig::new(self.witness_target(v.s)?, 16.0);
                template.epsilon = v.epsilon;
                let n_values = v.n_values.clone().ok_or_else(|| missing("experiment.n_values", &what))?;
                check_witness(&template, &n_values, 2, &what)?;
                VerifyJob::BilinearWitness { template, n_values }
            }
            Estimate::Equivalence => {
                let cfg = v.equivalence.ok_or_else(|| missing("experiment.equivalence", &what))?;
                cfg.validate().map_err(at_key("experiment.equivalence", "verify"))?;
                VerifyJob::Equivalence { ensemble: self.ensemble(v)?, cfg }
            }
        })
    }
}

fn missing(key: &str, experiment: &str) -> CliError {
    CliError::invalid(key, format!("required by experiment `{experiment}`"))
}

fn check_witness(
    template: &WitnessConfig,
    n_values: &[f64],
    at_least: usize,
    experiment: &str,
) -> Result<(), CliError> {
    if n_values.len() < at_least {
        return Err(CliError::invalid("experiment.n_values", format!("need at least {at_least} values of N")));
    }
    for &n in n_values {
        template.with_n(n).validate().map_err(at_key("experiment", experiment))?;
    }
    Ok(())
}

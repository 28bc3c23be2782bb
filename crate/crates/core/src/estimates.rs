//! Ensemble checks of the linear estimates.
//!
//! An inequality `A ≲ B` with an unspecified constant is tested by computing
//! both sides on seeded data, tracking `A/B` across a scan family and fitting
//! the exponent of the worst ratio against the scan variable. Every report
//! keeps the per-member values, so the pass flag is a pure function of rows,
//! fit and threshold.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicDecomposition;
use crate::ensemble::{Ensemble, Member, Profile};
use crate::error::{Error, Result};
use crate::evolution::{apply_phases, bilinear, DuhamelStream, EquationSpec, Propagator};
use crate::fit::{fit_dyadic_exponent, fit_power_law};
use crate::illposed::{witness_norm, witness_pair, WitnessConfig};
use crate::norms::{
    besov_norm, embedding_gap, sobolev_norm, weighted_besov_norm, weighted_sobolev_norm, xt_seminorms,
    BlockTableAccumulator, Summation, BOUNDARY_MASS_LIMIT,
};
use crate::spectral::{SpectralField, TorusGrid};
use crate::trajectory::{Exponent, MixedNorm, MixedNormAccumulator, TimeGrid};

/// Slack allowed above a predicted exponent.
pub const EXPONENT_TOLERANCE: f64 = 0.1;
/// Largest scan exponent accepted for the smoothing and maximal ratios.
pub const SCALE_TOLERANCE: f64 = 0.05;
/// Tolerance of the unitarity identity.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;
/// Largest growth exponent in `T` accepted for `‖U(t)u_0‖_{L^1_x L^∞_T}`.
pub const HORIZON_EXPONENT_BOUND: f64 = 1.05;
/// `C` with `1/C ≤ ‖f‖_{H^s} / ‖f‖_{B^{s,2}} ≤ C`, measured once and frozen.
pub const SOBOLEV_BESOV_BRACKET: f64 = 2.0;
/// `C` for the weighted equivalence, measured once and frozen.
pub const WEIGHTED_SOBOLEV_BRACKET: f64 = 2.0;

/// Weighted dyadic identities need the tails of the block kernels inside the torus.
const WEIGHTED_HALF_PERIOD: f64 = 400.0;
const DOMAIN_MARGIN: f64 = 1.2;
/// `L ≥ GUARD_MARGIN·v_max·T`, strictly inside the guard `v_max·T < L/2`.
const GUARD_MARGIN: f64 = 2.2;
/// Grid wavenumbers reach `1.25×` the resolution band.
const MODE_OVERSAMPLING: f64 = 2.5;
/// Time steps per packet width travelled.
const STEPS_PER_WIDTH: f64 = 4.0;
const MIN_POINTS: usize = 256;
const SPEED_SAMPLES: usize = 4096;

/// Variable against which a report fits its exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVariable {
    /// Dyadic level `l`, fitted in `log_2`.
    Level,
    /// Carrier frequency `N`.
    Frequency,
    /// Dilation factor `λ` of `u_0(λx)`.
    Dilation,
    /// Time horizon `T`.
    Horizon,
    /// No scan: ensemble statistics only.
    Member,
}

impl ScanVariable {
    pub fn symbol(&self) -> &'static str {
        match self {
            Self::Level => "l",
            Self::Frequency => "N",
            Self::Dilation => "lambda",
            Self::Horizon => "T",
            Self::Member => "member",
        }
    }
}

/// Pass rule of a report. All rules also require every ratio to be finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparison {
    /// `fitted ≤ predicted + tolerance`.
    AtMost { tolerance: f64 },
    /// `|fitted − predicted| ≤ tolerance`.
    Matches { tolerance: f64 },
    /// `|ratio − 1| ≤ tolerance` on every row.
    Equality { tolerance: f64 },
    /// `lo ≤ ratio ≤ hi` on every row.
    Bracket { lo: f64, hi: f64 },
    /// Finite ratios only.
    Bounded,
}

/// One member at one scan value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRow {
    pub member: usize,
    pub scan_value: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub half_period: f64,
    pub points: usize,
    pub time_steps: usize,
    pub horizon: f64,
    /// `v_max·T / (L/2)`; zero when no time evolution is involved.
    pub guard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: String,
    pub scan: ScanVariable,
    pub j: u32,
    pub seed: u64,
    pub rows: Vec<EstimateRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub fitted_exponent: Option<f64>,
    pub predicted_exponent: Option<f64>,
    pub residual: Option<f64>,
    pub comparison: Comparison,
    pub pass: bool,
}

pub const ESTIMATE_CSV_HEADER: &str = "estimate,row,member,scan_value,lhs,rhs,ratio,half_period,points,time_steps,horizon,guard,fitted_exponent,predicted_exponent,residual,pass";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

impl EstimateReport {
    /// One line per row followed by a summary line, without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{i},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{:.12e},{:.12e},,,,\n",
                self.estimate,
                r.member,
                r.scan_value,
                r.lhs,
                r.rhs,
                r.ratio,
                r.half_period,
                r.points,
                r.time_steps,
                r.horizon,
                r.guard
            ));
        }
        out.push_str(&format!(
            "{},summary,,,,,{:.12e},,,,,,{},{},{},{}\n",
            self.estimate,
            self.max_ratio,
            opt(self.fitted_exponent),
            opt(self.predicted_exponent),
            opt(self.residual),
            self.pass
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{ESTIMATE_CSV_HEADER}\n{}", self.csv_rows())
    }
}

/// Several reports in one table.
pub fn reports_to_csv(reports: &[EstimateReport]) -> String {
    let mut out = format!("{ESTIMATE_CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.csv_rows());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FitTarget {
    /// Worst ratio at each scan value.
    Ratio,
    /// Worst `lhs / lhs(first scan value)` per member.
    GrowthOfLhs,
}

struct Draft {
    name: &'static str,
    predicted: Option<f64>,
    comparison: Comparison,
    fit: Option<FitTarget>,
    rows: Vec<EstimateRow>,
}

impl Draft {
    fn new(name: &'static str, predicted: Option<f64>, comparison: Comparison, fit: Option<FitTarget>) -> Self {
        Self { name, predicted, comparison, fit, rows: Vec::new() }
    }
}

fn scan_values(rows: &[EstimateRow]) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.contains(&r.scan_value) {
            values.push(r.scan_value);
        }
    }
    values
}

fn finish(draft: Draft, scan: ScanVariable, j: u32, seed: u64) -> Result<EstimateReport> {
    let rows = draft.rows;
    let finite = rows.iter().all(|r| r.ratio.is_finite());
    let empty = rows.is_empty();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);

    let fit = match draft.fit {
        Some(target) if finite => {
            let mut values = scan_values(&rows);
            if scan == ScanVariable::Level {
                // the low-frequency piece is not part of the dyadic family
                values.retain(|&v| v >= 1.0);
            }
            let first = values.first().copied();
            let worst: Vec<f64> = values
                .iter()
                .map(|&v| {
                    rows.iter()
                        .filter(|r| r.scan_value == v)
                        .map(|r| match target {
                            FitTarget::Ratio => r.ratio,
                            FitTarget::GrowthOfLhs => {
                                let base = rows
                                    .iter()
                                    .find(|b| Some(b.scan_value) == first && b.member == r.member)
                                    .map_or(f64::NAN, |b| b.lhs);
                                r.lhs / base
                            }
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            let line = match scan {
                ScanVariable::Level => fit_dyadic_exponent(&values, &worst)?,
                _ => fit_power_law(&values, &worst)?,
            };
            let offset = match (scan, target) {
                (ScanVariable::Level, FitTarget::Ratio) => draft.predicted.unwrap_or(0.0),
                _ => 0.0,
            };
            Some((line.slope + offset, line.residual))
        }
        _ => None,
    };
    let fitted_exponent = fit.map(|f| f.0);
    let residual = fit.map(|f| f.1);

    let rule_holds = match draft.comparison {
        Comparison::AtMost { tolerance } => match (fitted_exponent, draft.predicted) {
            (Some(f), Some(p)) => f <= p + tolerance,
            _ => false,
        },
        Comparison::Matches { tolerance } => match (fitted_exponent, draft.predicted) {
            (Some(f), Some(p)) => (f - p).abs() <= tolerance,
            _ => false,
        },
        Comparison::Equality { tolerance } => rows.iter().all(|r| (r.ratio - 1.0).abs() <= tolerance),
        Comparison::Bracket { lo, hi } => rows.iter().all(|r| r.ratio >= lo && r.ratio <= hi),
        Comparison::Bounded => true,
    };
    Ok(EstimateReport {
        estimate: draft.name.to_string(),
        scan,
        j,
        seed,
        rows,
        max_ratio,
        min_ratio,
        fitted_exponent,
        predicted_exponent: draft.predicted,
        residual,
        comparison: draft.comparison,
        pass: finite && !empty && rule_holds,
    })
}

/// How the horizon follows the scan variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonScaling {
    /// Horizon shrinks with the scan so that the distance travelled by the data,
    /// measured in its own width, stays fixed: `T_l = T·2^{−(2j+1)(l−l_0)}`,
    /// `T_λ = T·(λ/λ_0)^{−(2j+1)}`, `T_N = T·(N_0/N)^{2j}`.
    #[default]
    Parabolic,
    /// Same horizon at every scan value.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    #[serde(default = "one")]
    pub grid_factor: usize,
    #[serde(default = "one")]
    pub time_factor: usize,
    #[serde(default = "default_min_steps")]
    pub min_time_steps: usize,
    #[serde(default = "default_min_half_period")]
    pub min_half_period: f64,
}

fn one() -> usize {
    1
}
fn default_min_steps() -> usize {
    256
}
fn default_min_half_period() -> f64 {
    20.0
}
fn yes() -> bool {
    true
}

impl Default for Resolution {
    fn default() -> Self {
        Self { grid_factor: 1, time_factor: 1, min_time_steps: 256, min_half_period: 20.0 }
    }
}

impl Resolution {
    /// Twice the grid points and twice the time steps.
    pub fn refined(&self) -> Self {
        Self { grid_factor: 2 * self.grid_factor, time_factor: 2 * self.time_factor, ..*self }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("grid_factor", self.grid_factor), ("time_factor", self.time_factor)] {
            if !v.is_power_of_two() {
                return Err(Error::param(name, "must be a power of two"));
            }
        }
        if self.min_time_steps == 0 {
            return Err(Error::param("min_time_steps", "must be positive"));
        }
        if !(self.min_half_period > 0.0 && self.min_half_period.is_finite()) {
            return Err(Error::param("min_half_period", "must be positive"));
        }
        Ok(())
    }
}

/// A grid imposed on every member instead of the automatic sizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedGrid {
    pub half_period: f64,
    pub points: usize,
    pub time_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    /// Horizon at the first scan value.
    pub horizon: f64,
    #[serde(default)]
    pub horizon_scaling: HorizonScaling,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub grid: Option<FixedGrid>,
    /// Refuse runs in which data can wrap around the torus.
    #[serde(default = "yes")]
    pub enforce_guard: bool,
}

impl LabConfig {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            horizon_scaling: HorizonScaling::Parabolic,
            resolution: Resolution::default(),
            grid: None,
            enforce_guard: true,
        }
    }

    pub fn refined(&self) -> Self {
        let grid = self.grid.map(|g| FixedGrid { points: 2 * g.points, time_steps: 2 * g.time_steps, ..g });
        Self { resolution: self.resolution.refined(), grid, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon", "must be positive and finite"));
        }
        self.resolution.validate()
    }
}

/// Spatial and spectral size of a datum.
#[derive(Debug, Clone, Copy)]
struct Footprint {
    band: f64,
    resolution_band: f64,
    extent: f64,
    width: f64,
}

impl Footprint {
    fn of(p: &Profile) -> Self {
        Self { band: p.band(), resolution_band: p.resolution_band(), extent: p.extent(), width: p.min_width() }
    }

    fn union(&self, other: &Self) -> Self {
        Self {
            band: self.band.max(other.band),
            resolution_band: self.resolution_band.max(other.resolution_band),
            extent: self.extent.max(other.extent),
            width: self.width.min(other.width),
        }
    }
}

/// `max |ω'(ξ)|` over `|ξ| ≤ band`.
fn max_group_speed(spec: &EquationSpec, band: f64) -> f64 {
    let h = 1e-6 * band.max(1.0);
    (1..=SPEED_SAMPLES)
        .map(|i| band * i as f64 / SPEED_SAMPLES as f64)
        .flat_map(|xi| [xi, -xi])
        .map(|xi| ((spec.omega(xi + h) - spec.omega(xi - h)) / (2.0 * h)).abs())
        .fold(0.0, f64::max)
}

struct Plan {
    grid: TorusGrid<f64>,
    steps: usize,
    horizon: f64,
    guard: f64,
}

impl Plan {
    fn row(&self, member: usize, scan_value: f64, lhs: f64, rhs: f64) -> EstimateRow {
        EstimateRow {
            member,
            scan_value,
            lhs,
            rhs,
            ratio: lhs / rhs,
            half_period: self.grid.half_period(),
            points: self.grid.num_points(),
            time_steps: self.steps,
            horizon: self.horizon,
            guard: self.guard,
        }
    }

    fn time_grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::one_sided(self.horizon, self.steps)
    }
}

fn points_for(band: f64, half_period: f64, factor: usize) -> usize {
    let m = (MODE_OVERSAMPLING * band * half_period / PI).ceil() as usize;
    m.next_power_of_two().max(MIN_POINTS) * factor
}

/// Grid and time steps for one datum evolved up to `horizon`.
fn plan(spec: &EquationSpec, fp: &Footprint, horizon: f64, cfg: &LabConfig) -> Result<Plan> {
    let travel = max_group_speed(spec, fp.band) * horizon;
    let res = &cfg.resolution;
    let (grid, steps) = match &cfg.grid {
        Some(g) => (TorusGrid::new(g.half_period, g.points)?, g.time_steps),
        None => {
            let half_period = res.min_half_period.max(DOMAIN_MARGIN * (fp.extent + travel)).max(GUARD_MARGIN * travel);
            let points = points_for(fp.resolution_band, half_period, res.grid_factor);
            let steps = (STEPS_PER_WIDTH * travel / fp.width).ceil().max(res.min_time_steps as f64) as usize;
            (TorusGrid::new(half_period, points)?, steps * res.time_factor)
        }
    };
    let half_period = grid.half_period();
    let guard = travel / (half_period / 2.0);
    if cfg.enforce_guard && guard >= 1.0 {
        return Err(Error::Guard(format!("T·v_max = {travel:.4e} is not below L/2 = {:.4e}", half_period / 2.0)));
    }
    if grid.max_wavenumber() < fp.band {
        return Err(Error::param(
            "grid.points",
            format!("grid resolves |ξ| ≤ {:.4e}, data reach {:.4e}", grid.max_wavenumber(), fp.band),
        ));
    }
    Ok(Plan { grid, steps, horizon, guard })
}

/// Static grid for a datum that is not evolved.
fn static_grid(member: &Member, min_half_period: f64, factor: usize) -> Result<TorusGrid<f64>> {
    match member {
        Member::Localized(p) => {
            let half_period = min_half_period.max(DOMAIN_MARGIN * p.extent());
            TorusGrid::new(half_period, points_for(p.resolution_band(), half_period, factor))
        }
        Member::PureMode { xi } => {
            // L = π·2^p makes every dyadic frequency a grid mode
            let mut half_period = PI;
            while half_period < min_half_period {
                half_period *= 2.0;
            }
            TorusGrid::new(half_period, points_for(xi.abs().max(1.0), half_period, factor))
        }
    }
}

fn member_field(member: &Member, grid: &TorusGrid<f64>) -> Result<SpectralField<f64>> {
    let f = match member {
        Member::Localized(p) => p.field(grid)?,
        Member::PureMode { xi } => {
            let k = xi * grid.half_period() / PI;
            if (k - k.round()).abs() > 1e-9 {
                return Err(Error::param("xi", format!("{xi} is not a mode of the grid")));
            }
            SpectralField::pure_mode(grid, k.round() as i64, Complex64::new(1.0, 0.0))?
        }
    };
    if matches!(member, Member::Localized(_)) && f.boundary_mass_fraction() >= BOUNDARY_MASS_LIMIT {
        return Err(Error::param("grid.half_period", "data carry mass near the torus boundary"));
    }
    Ok(f)
}

fn localized(member: &Member) -> Result<&Profile> {
    match member {
        Member::Localized(p) => Ok(p),
        Member::PureMode { .. } => Err(Error::param("ensemble", "this estimate needs localized members")),
    }
}

fn scale_by(f: &SpectralField<f64>, symbol: &[f64]) -> SpectralField<f64> {
    let mut out = f.clone();
    for (c, s) in out.coeffs_mut().iter_mut().zip(symbol) {
        *c *= *s;
    }
    out
}

fn times_symbol(f: &SpectralField<f64>, symbol: &[Complex64]) -> Vec<Complex64> {
    let coeffs: Vec<Complex64> = f.coeffs().iter().zip(symbol).map(|(c, s)| c * s).collect();
    f.grid().inverse(&coeffs).expect("length preserved")
}

fn derivative_symbol(grid: &TorusGrid<f64>, n: u32) -> Vec<Complex64> {
    grid.wavenumbers().into_iter().map(|xi| Complex64::new(0.0, xi).powu(n)).collect()
}

fn ts(q: Exponent, p: Exponent) -> MixedNorm {
    MixedNorm::TimeSpace { q, p }
}
fn st(p: Exponent, q: Exponent) -> MixedNorm {
    MixedNorm::SpaceTime { p, q }
}
use Exponent::{Four, Infinity as Inf, One, Two};

fn pow2(e: f64) -> f64 {
    2f64.powf(e)
}

fn check_scan(values: &[f64], name: &str) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::param(name, "a scan needs at least two values"));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::param(name, "scan values must be positive"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bernstein

/// `‖Δ_l ∂^n f‖ ≤ C·2^{nl}‖Δ_l f‖` and, for localized members,
/// `‖xΔ_l ∂^n f‖ ≤ C(2^{nl}‖xΔ_l f‖ + 2^{n(l−1)}‖Δ_l f‖)`, with the ratio's
/// `l`-exponent expected to vanish. The weighted bound is also reported with
/// the lower-order term `2^{(n−1)l}‖Δ_l f‖`, which scales like the left side.
pub fn verify_bernstein(
    ensemble: &Ensemble,
    n: u32,
    levels: &[u32],
    resolution: &Resolution,
) -> Result<Vec<EstimateReport>> {
    resolution.validate()?;
    if levels.len() < 2 {
        return Err(Error::param("levels", "a scan needs at least two levels"));
    }
    let mut tasks = Vec::new();
    for &l in levels {
        for (i, m) in ensemble.at_level(l).members()?.into_iter().enumerate() {
            tasks.push((l, i, m));
        }
    }
    let weighted = tasks.iter().all(|(_, _, m)| matches!(m, Member::Localized(_)));
    let rows = tasks
        .par_iter()
        .map(|(l, i, m)| {
            let grid = static_grid(m, resolution.min_half_period, resolution.grid_factor)?;
            let dec = DyadicDecomposition::new(&grid);
            let b = dec.lp_block(&member_field(m, &grid)?, *l as usize)?;
            let b_norm = b.l2_norm();
            if b_norm == 0.0 {
                return Err(Error::ZeroData(format!("member {i} has no content in block {l}")));
            }
            let db = b.derivative(n);
            let scale = pow2((n * l) as f64);
            let mk = |lhs: f64, rhs: f64| EstimateRow {
                member: *i,
                scan_value: *l as f64,
                lhs,
                rhs,
                ratio: lhs / rhs,
                half_period: grid.half_period(),
                points: grid.num_points(),
                time_steps: 0,
                horizon: 0.0,
                guard: 0.0,
            };
            let plain = mk(db.l2_norm(), scale * b_norm);
            let weighted_rows = weighted.then(|| {
                let lhs = db.multiply_by_x().l2_norm();
                let xb = scale * b.multiply_by_x().l2_norm();
                let displayed = xb + pow2(n as f64 * (*l as f64 - 1.0)) * b_norm;
                let sharp = xb + pow2((n as f64 - 1.0) * *l as f64) * b_norm;
                (mk(lhs, displayed), mk(lhs, sharp))
            });
            Ok((plain, weighted_rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let matches = Comparison::Matches { tolerance: EXPONENT_TOLERANCE };
    let at_most = Comparison::AtMost { tolerance: EXPONENT_TOLERANCE };
    let mut plain = Draft::new("bernstein", Some(0.0), matches, Some(FitTarget::Ratio));
    // the displayed lower-order term 2^{n(l−1)} dominates the commutator's
    // 2^{(n−1)l}, so that form can only be checked from above
    let mut displayed = Draft::new("bernstein_weighted", Some(0.0), at_most, Some(FitTarget::Ratio));
    let mut sharp = Draft::new("bernstein_weighted_sharp", Some(0.0), matches, Some(FitTarget::Ratio));
    for (p, w) in rows {
        plain.rows.push(p);
        if let Some((d, s)) = w {
            displayed.rows.push(d);
            sharp.rows.push(s);
        }
    }
    let mut out = vec![finish(plain, ScanVariable::Level, 0, ensemble.seed)?];
    if weighted {
        out.push(finish(displayed, ScanVariable::Level, 0, ensemble.seed)?);
        out.push(finish(sharp, ScanVariable::Level, 0, ensemble.seed)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Smoothing and maximal estimates

/// Family of data derived from each ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scan {
    /// `u_0(λx)`.
    Dilation { factors: Vec<f64> },
    /// `e^{iNx}u_0(x)`.
    Modulation { carriers: Vec<f64> },
}

impl Scan {
    fn values(&self) -> &[f64] {
        match self {
            Self::Dilation { factors } => factors,
            Self::Modulation { carriers } => carriers,
        }
    }

    fn variable(&self) -> ScanVariable {
        match self {
            Self::Dilation { .. } => ScanVariable::Dilation,
            Self::Modulation { .. } => ScanVariable::Frequency,
        }
    }

    fn validate(&self) -> Result<()> {
        check_scan(self.values(), "scan")
    }

    fn apply(&self, p: &Profile, value: f64) -> Profile {
        match self {
            Self::Dilation { .. } => p.scaled(value),
            Self::Modulation { .. } => p.modulated(value),
        }
    }

    fn horizon(&self, j: u32, value: f64, cfg: &LabConfig) -> f64 {
        let base = self.values()[0];
        let j = j as f64;
        match (cfg.horizon_scaling, self) {
            (HorizonScaling::Fixed, _) => cfg.horizon,
            (HorizonScaling::Parabolic, Self::Dilation { .. }) => cfg.horizon * (value / base).powf(-(2.0 * j + 1.0)),
            (HorizonScaling::Parabolic, Self::Modulation { .. }) => cfg.horizon * (base / value).powf(2.0 * j),
        }
    }
}

/// Norms of `a = U(t)u_0` and of `W = ∫_0^t U(t−t')a(t')dt'` over one horizon.
struct FreeNorms {
    u0: f64,
    d14: f64,
    d14_x: f64,
    d14_top: f64,
    /// `‖∂^j a‖_{L^∞_x L^2_T}`
    smoothing: f64,
    /// `‖∂^j W‖_{L^∞_T L^2_x}`
    energy_duhamel: f64,
    /// `‖∂^{2j} W‖_{L^∞_x L^2_T}`
    smoothing_duhamel: f64,
    /// `‖a‖_{L^1_x L^2_T}`
    forcing: f64,
    /// `‖a‖_{L^4_x L^∞_T}`
    maximal4: f64,
    /// `‖a‖_{L^1_x L^∞_T}` at each checkpoint.
    maximal1: Vec<f64>,
}

fn free_pass(spec: &EquationSpec, plan: &Plan, u0: &SpectralField<f64>, checkpoints: &[usize]) -> Result<FreeNorms> {
    let j = spec.j();
    let grid = &plan.grid;
    let times = plan.time_grid()?;
    let dt = times.dt();
    let prop = Propagator::new(spec, grid);
    let step = prop.phases(dt);
    let dj = derivative_symbol(grid, j);
    let d2j = derivative_symbol(grid, 2 * j);
    let mut stream = DuhamelStream::new(&prop, dt);
    let mut acc_dj_a = MixedNormAccumulator::new(grid, dt);
    let mut acc_a = MixedNormAccumulator::new(grid, dt);
    let mut acc_dj_w = MixedNormAccumulator::new(grid, dt);
    let mut acc_d2j_w = MixedNormAccumulator::new(grid, dt);
    let mut maximal1 = Vec::with_capacity(checkpoints.len());
    let mut a = u0.clone();
    for n in 0..times.len() {
        if n > 0 {
            a = apply_phases(&step, &a);
        }
        let w = stream.push(a.clone());
        acc_dj_w.push(&times_symbol(w, &dj));
        acc_d2j_w.push(&times_symbol(w, &d2j));
        acc_dj_a.push(&times_symbol(&a, &dj));
        acc_a.push(&a.to_physical());
        if checkpoints.contains(&n) {
            maximal1.push(acc_a.finish(st(One, Inf))?);
        }
    }
    let d14 = |f: &SpectralField<f64>| f.fractional_derivative(0.25).l2_norm();
    Ok(FreeNorms {
        u0: u0.l2_norm(),
        d14: d14(u0),
        d14_x: d14(&u0.multiply_by_x()),
        d14_top: d14(&u0.derivative(2 * j)),
        smoothing: acc_dj_a.finish(st(Inf, Two))?,
        energy_duhamel: acc_dj_w.finish(ts(Inf, Two))?,
        smoothing_duhamel: acc_d2j_w.finish(st(Inf, Two))?,
        forcing: acc_a.finish(st(One, Two))?,
        maximal4: acc_a.finish(st(Four, Inf))?,
        maximal1,
    })
}

/// Horizon multiples used for the growth-in-`T` check of the `L^1_x L^∞_T` bound.
pub const HORIZON_FACTORS: [usize; 4] = [1, 2, 4, 8];

fn free_reports(spec: &EquationSpec, ensemble: &Ensemble, scan: &Scan, cfg: &LabConfig) -> Result<Vec<EstimateReport>> {
    spec.validate()?;
    cfg.validate()?;
    scan.validate()?;
    let j = spec.j();
    let members = ensemble.members()?;
    let profiles = members.iter().map(localized).collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::new();
    for &v in scan.values() {
        for (i, p) in profiles.iter().enumerate() {
            tasks.push((v, i, scan.apply(p, v)));
        }
    }
    let rows = tasks
        .par_iter()
        .map(|(v, i, p)| {
            let horizon = scan.horizon(j, *v, cfg);
            let plan = plan(spec, &Footprint::of(p), horizon, cfg)?;
            let u0 = member_field(&Member::Localized(p.clone()), &plan.grid)?;
            let last = plan.steps;
            let f = free_pass(spec, &plan, &u0, &[last])?;
            let t = horizon;
            Ok([
                plan.row(*i, *v, f.smoothing, f.u0),
                plan.row(*i, *v, f.energy_duhamel, f.forcing),
                plan.row(*i, *v, f.smoothing_duhamel, f.forcing),
                plan.row(*i, *v, f.maximal4, f.d14),
                plan.row(*i, *v, f.maximal1[0], f.d14 + f.d14_x + t * f.d14_top),
            ])
        })
        .collect::<Result<Vec<_>>>()?;

    let cmp = Comparison::AtMost { tolerance: SCALE_TOLERANCE };
    let names = ["smoothing_homogeneous", "smoothing_energy", "smoothing_retarded", "maximal_l4", "maximal_l1"];
    let mut drafts: Vec<Draft> = names.iter().map(|n| Draft::new(n, Some(0.0), cmp, Some(FitTarget::Ratio))).collect();
    for r in rows {
        for (d, row) in drafts.iter_mut().zip(r) {
            d.rows.push(row);
        }
    }
    let mut out =
        drafts.into_iter().map(|d| finish(d, scan.variable(), j, ensemble.seed)).collect::<Result<Vec<_>>>()?;

    // growth in T on the first scan value, one pass per member up to 8T
    let v0 = scan.values()[0];
    let t0 = scan.horizon(j, v0, cfg);
    let top = *HORIZON_FACTORS.last().expect("non-empty");
    let growth = profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let p = scan.apply(p, v0);
            let plan = plan(spec, &Footprint::of(&p), t0 * top as f64, cfg)?;
            let steps = plan.steps.div_ceil(top) * top;
            let plan = Plan { steps, ..plan };
            let u0 = member_field(&Member::Localized(p), &plan.grid)?;
            let checkpoints: Vec<usize> = HORIZON_FACTORS.iter().map(|k| steps / top * k).collect();
            let f = free_pass(spec, &plan, &u0, &checkpoints)?;
            Ok(HORIZON_FACTORS
                .iter()
                .zip(&f.maximal1)
                .map(|(k, lhs)| {
                    let t = t0 * *k as f64;
                    let mut row = plan.row(i, t, *lhs, f.d14 + f.d14_x + t * f.d14_top);
                    row.horizon = t;
                    row
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut draft = Draft::new(
        "maximal_l1_horizon",
        Some(1.0),
        Comparison::AtMost { tolerance: HORIZON_EXPONENT_BOUND - 1.0 },
        Some(FitTarget::GrowthOfLhs),
    );
    draft.rows = growth.into_iter().flatten().collect();
    out.push(finish(draft, ScanVariable::Horizon, j, ensemble.seed)?);
    Ok(out)
}

/// Kato smoothing for the free group and its two retarded versions, with the
/// forcing `f(t) = U(t)u_0`; one report each, fitted against the scan.
pub fn verify_smoothing(
    spec: &EquationSpec,
    ensemble: &Ensemble,
    scan: &Scan,
    cfg: &LabConfig,
) -> Result<Vec<EstimateReport>> {
    let mut all = free_reports(spec, ensemble, scan, cfg)?;
    all.truncate(3);
    Ok(all)
}

/// `L^4_x L^∞_t` and `L^1_x L^∞_T` maximal bounds, plus the growth of the
/// latter in `T`.
pub fn verify_maximal(
    spec: &EquationSpec,
    ensemble: &Ensemble,
    scan: &Scan,
    cfg: &LabConfig,
) -> Result<Vec<EstimateReport>> {
    Ok(free_reports(spec, ensemble, scan, cfg)?.split_off(3))
}

/// Smoothing and maximal reports from one set of passes.
pub fn verify_free_group(
    spec: &EquationSpec,
    ensemble: &Ensemble,
    scan: &Scan,
    cfg: &LabConfig,
) -> Result<Vec<EstimateReport>> {
    free_reports(spec, ensemble, scan, cfg)
}

// ---------------------------------------------------------------------------
// Frequency-localized estimates

/// Groups of frequency-localized estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizedGroup {
    /// `L^∞_T L^2_x` bounds.
    Energy,
    /// `L^∞_x L^2_T` bounds.
    Smoothing,
    /// `L^1_x L^∞_T` and `L^4_x L^∞_T` bounds.
    Maximal,
}

/// Name, group and dyadic exponent `c` of the displayed `2^{cl}` factor.
pub const LOCALIZED_ESTIMATES: [(&str, LocalizedGroup); 11] = [
    ("block_unitarity", LocalizedGroup::Energy),
    ("block_weighted_energy", LocalizedGroup::Energy),
    ("block_duhamel_energy", LocalizedGroup::Energy),
    ("block_weighted_duhamel_energy", LocalizedGroup::Energy),
    ("block_smoothing", LocalizedGroup::Smoothing),
    ("block_weighted_smoothing", LocalizedGroup::Smoothing),
    ("block_duhamel_smoothing", LocalizedGroup::Smoothing),
    ("block_weighted_duhamel_smoothing", LocalizedGroup::Smoothing),
    ("block_maximal", LocalizedGroup::Maximal),
    ("block_duhamel_maximal", LocalizedGroup::Maximal),
    ("block_duhamel_maximal_l4", LocalizedGroup::Maximal),
];

fn localized_exponents(j: f64) -> [f64; 11] {
    [0.0, 2.0 * j, -j, j, -j, j, -2.0 * j, 0.0, 0.25 + 2.0 * j, 0.25 + j, 0.25 - j]
}

/// Norms of `a = U(t)b`, `b = Δ_l u_0`, and of its Duhamel integral.
struct BlockNormsPass {
    b: f64,
    xb: f64,
    a_sup_t: f64,
    xa_sup_t: f64,
    a_sup_x: f64,
    xa_sup_x: f64,
    a_l1_sup: f64,
    a_l1_l2: f64,
    xa_l1_l2: f64,
    w_sup_t: f64,
    xw_sup_t: f64,
    w_sup_x: f64,
    xw_sup_x: f64,
    w_l1_sup: f64,
    w_l4_sup: f64,
}

fn block_pass(spec: &EquationSpec, plan: &Plan, b: &SpectralField<f64>) -> Result<BlockNormsPass> {
    let grid = &plan.grid;
    let times = plan.time_grid()?;
    let dt = times.dt();
    let prop = Propagator::new(spec, grid);
    let step = prop.phases(dt);
    let coords = grid.coordinates();
    let x = |m: usize| coords[m];
    let mut stream = DuhamelStream::new(&prop, dt);
    let new = || MixedNormAccumulator::new(grid, dt);
    let (mut acc_a, mut acc_xa, mut acc_w, mut acc_xw) = (new(), new(), new(), new());
    let mut a = b.clone();
    for n in 0..times.len() {
        if n > 0 {
            a = apply_phases(&step, &a);
        }
        let pa = a.to_physical();
        let pw = stream.push(a.clone()).to_physical();
        acc_a.push(&pa);
        acc_xa.push_weighted(&pa, x);
        acc_w.push(&pw);
        acc_xw.push_weighted(&pw, x);
    }
    Ok(BlockNormsPass {
        b: b.l2_norm(),
        xb: b.multiply_by_x().l2_norm(),
        a_sup_t: acc_a.finish(ts(Inf, Two))?,
        xa_sup_t: acc_xa.finish(ts(Inf, Two))?,
        a_sup_x: acc_a.finish(st(Inf, Two))?,
        xa_sup_x: acc_xa.finish(st(Inf, Two))?,
        a_l1_sup: acc_a.finish(st(One, Inf))?,
        a_l1_l2: acc_a.finish(st(One, Two))?,
        xa_l1_l2: acc_xa.finish(st(One, Two))?,
        w_sup_t: acc_w.finish(ts(Inf, Two))?,
        xw_sup_t: acc_xw.finish(ts(Inf, Two))?,
        w_sup_x: acc_w.finish(st(Inf, Two))?,
        xw_sup_x: acc_xw.finish(st(Inf, Two))?,
        w_l1_sup: acc_w.finish(st(One, Inf))?,
        w_l4_sup: acc_w.finish(st(Four, Inf))?,
    })
}

/// `(lhs, rhs)` of every localized estimate at level `l` and horizon `t`.
fn localized_sides(p: &BlockNormsPass, j: f64, l: f64, t: f64) -> [(f64, f64); 11] {
    let e = |c: f64| pow2(c * l);
    [
        (p.a_sup_t, p.b),
        (p.xa_sup_t, p.xb + t * e(2.0 * j) * p.b),
        (p.w_sup_t, e(-j) * p.a_l1_l2),
        (p.xw_sup_t, e(-j) * p.xa_l1_l2 + t * e(j) * p.a_l1_l2),
        (p.a_sup_x, e(-j) * p.b),
        (p.xa_sup_x, e(-j) * p.xb + t * e(j) * p.b),
        (p.w_sup_x, e(-2.0 * j) * p.a_l1_l2),
        (p.xw_sup_x, e(-2.0 * j) * p.xa_l1_l2 + t * p.a_l1_l2),
        (p.a_l1_sup, e(0.25 + 2.0 * j) * (1.0 + t) * p.b + e(0.25) * p.xb),
        (p.w_l1_sup, e(0.25 - j) * p.xa_l1_l2 + (1.0 + t) * e(0.25 + j) * p.a_l1_l2),
        (p.w_l4_sup, e(0.25 - j) * p.a_l1_l2),
    ]
}

/// Horizon at level `l`; `l = 0` (the low-frequency piece) keeps the base horizon.
fn level_horizon(j: u32, l: u32, reference: u32, cfg: &LabConfig) -> f64 {
    match cfg.horizon_scaling {
        HorizonScaling::Parabolic if l > 0 => cfg.horizon * pow2(-((2 * j + 1) as f64) * (l as f64 - reference as f64)),
        _ => cfg.horizon,
    }
}

/// Frequency-localized energy, smoothing and maximal estimates on the blocks
/// `Δ_l u_0` (`S_0 u_0` for `l = 0`), with the forcing `f(t) = U(t)u_0` in the
/// retarded ones. Each report fits the `l`-exponent of `lhs / (rhs without its
/// 2^{cl})` over `l ≥ 1`; unitarity is checked as an identity.
pub fn verify_localized(
    spec: &EquationSpec,
    ensemble: &Ensemble,
    levels: &[u32],
    group: Option<LocalizedGroup>,
    cfg: &LabConfig,
) -> Result<Vec<EstimateReport>> {
    spec.validate()?;
    cfg.validate()?;
    let dyadic: Vec<u32> = levels.iter().copied().filter(|&l| l > 0).collect();
    if dyadic.len() < 2 {
        return Err(Error::param("levels", "a scan needs at least two levels l ≥ 1"));
    }
    let reference = *dyadic.iter().min().expect("non-empty");
    let j = spec.j();
    let mut tasks = Vec::new();
    for &l in levels {
        for (i, m) in ensemble.at_level(l).members()?.into_iter().enumerate() {
            let p = localized(&m)?.clone();
            tasks.push((l, i, p));
        }
    }
    let rows = tasks
        .par_iter()
        .map(|(l, i, p)| {
            let horizon = level_horizon(j, *l, reference, cfg);
            let mut fp = Footprint::of(p);
            fp.resolution_band = fp.resolution_band.max(pow2(*l as f64 + 1.0));
            let plan = plan(spec, &fp, horizon, cfg)?;
            let dec = DyadicDecomposition::new(&plan.grid);
            let symbol = if *l == 0 { dec.low_symbol() } else { dec.block_symbol(*l as usize)? };
            let u0 = member_field(&Member::Localized(p.clone()), &plan.grid)?;
            let b = scale_by(&u0, symbol);
            let pass = block_pass(spec, &plan, &b)?;
            let sides = localized_sides(&pass, j as f64, *l as f64, horizon);
            Ok(sides.map(|(lhs, rhs)| plan.row(*i, *l as f64, lhs, rhs)))
        })
        .collect::<Result<Vec<_>>>()?;

    let exps = localized_exponents(j as f64);
    let mut drafts: Vec<Draft> = LOCALIZED_ESTIMATES
        .iter()
        .zip(exps)
        .enumerate()
        .map(|(k, ((name, _), c))| {
            let cmp = if k == 0 {
                Comparison::Equality { tolerance: EQUALITY_TOLERANCE }
            } else {
                Comparison::AtMost { tolerance: EXPONENT_TOLERANCE }
            };
            Draft::new(name, Some(c), cmp, Some(FitTarget::Ratio))
        })
        .collect();
    for r in rows {
        for (d, row) in drafts.iter_mut().zip(r) {
            d.rows.push(row);
        }
    }
    drafts
        .into_iter()
        .zip(LOCALIZED_ESTIMATES)
        .filter(|(_, (_, g))| group.is_none_or(|want| want == *g))
        .map(|(d, _)| finish(d, ScanVariable::Level, j, ensemble.seed))
        .collect()
}

// ---------------------------------------------------------------------------
// Bilinear estimate

/// `‖∫_0^t U(t−t')B(u,v)dt'‖_{X_T} ≤ C(1+T)‖u‖_{X_T}‖v‖_{X_T}` for free
/// evolutions of consecutive ensemble members (cyclically paired).
pub fn verify_bilinear(spec: &EquationSpec, ensemble: &Ensemble, cfg: &LabConfig) -> Result<EstimateReport> {
    spec.validate()?;
    cfg.validate()?;
    let j = spec.j();
    let members = ensemble.members()?;
    let profiles = members.iter().map(localized).collect::<Result<Vec<_>>>()?;
    let count = profiles.len();
    let rows = (0..count)
        .into_par_iter()
        .map(|i| {
            let (p, q) = (profiles[i], profiles[(i + 1) % count]);
            let fp = Footprint::of(p).union(&Footprint::of(q));
            let plan = plan(spec, &fp, cfg.horizon, cfg)?;
            let grid = &plan.grid;
            let dec = DyadicDecomposition::new(grid);
            let times = plan.time_grid()?;
            let dt = times.dt();
            let prop = Propagator::new(spec, grid);
            let step = prop.phases(dt);
            let mut u = member_field(&Member::Localized(p.clone()), grid)?;
            let mut v = member_field(&Member::Localized(q.clone()), grid)?;
            let mut stream = DuhamelStream::new(&prop, dt);
            let new = || BlockTableAccumulator::new(&dec, dt);
            let (mut acc_u, mut acc_v, mut acc_w) = (new(), new(), new());
            for n in 0..times.len() {
                if n > 0 {
                    u = apply_phases(&step, &u);
                    v = apply_phases(&step, &v);
                }
                let w = stream.push(bilinear(spec, &u, &v));
                acc_w.push(w)?;
                acc_u.push(&u)?;
                acc_v.push(&v)?;
            }
            let xt = |acc: &BlockTableAccumulator<f64>| -> Result<f64> { Ok(xt_seminorms(&acc.finish()?, j).total()) };
            let lhs = xt(&acc_w)?;
            let rhs = (1.0 + cfg.horizon) * xt(&acc_u)? * xt(&acc_v)?;
            Ok(plan.row(i, i as f64, lhs, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut draft = Draft::new("bilinear_xt", None, Comparison::Bounded, None);
    draft.rows = rows;
    finish(draft, ScanVariable::Member, j, ensemble.seed)
}

/// The same bilinear functional measured in `H^s` on the ill-posedness
/// witness: `‖second iterate‖_{H^s} / (‖φ‖_{H^s}‖ψ_N‖_{H^s})` grows like
/// the witness exponent.
pub fn verify_bilinear_witness(template: &WitnessConfig, n_values: &[f64]) -> Result<EstimateReport> {
    check_scan(n_values, "n_values")?;
    let j = match template.target {
        crate::illposed::WitnessTarget::Generic { j, .. } => j,
        crate::illposed::WitnessTarget::Nonlocal { .. } => 1,
    };
    let rows = n_values
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let cfg = template.with_n(n);
            let pair = witness_pair(&cfg)?;
            let lhs = witness_norm(&cfg)?;
            let rhs = pair.low_norm() * pair.high_norm();
            Ok(EstimateRow {
                member: i,
                scan_value: n,
                lhs,
                rhs,
                ratio: lhs / rhs,
                half_period: 0.0,
                points: 0,
                time_steps: 0,
                horizon: cfg.t,
                guard: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut draft = Draft::new(
        "bilinear_witness",
        Some(template.predicted_exponent()),
        Comparison::Matches { tolerance: EXPONENT_TOLERANCE },
        Some(FitTarget::Ratio),
    );
    draft.rows = rows;
    finish(draft, ScanVariable::Frequency, j, 0)
}

// ---------------------------------------------------------------------------
// Norm equivalences

/// Parameters of [`verify_equivalences`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    /// Smoothness of the Sobolev/Besov comparison.
    pub s: f64,
    /// Integer smoothness of the weighted comparison.
    pub k: u32,
    /// Dispersion index of the embedding, which needs `s > 2j + 1/4`.
    pub j: u32,
    /// Smoothness of the embedded space.
    pub embedding_s: f64,
    #[serde(default)]
    pub resolution: Resolution,
}

impl EquivalenceConfig {
    pub fn new(s: f64, k: u32, j: u32, embedding_s: f64) -> Self {
        Self { s, k, j, embedding_s, resolution: Resolution::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        embedding_gap(self.j, self.embedding_s)?;
        self.resolution.validate()
    }
}

/// `H^s ∼ B^{s,2}`, the weighted equivalence
/// `‖f‖_{H^k(x²dx)} + ‖f‖_{H^{k−1}} ∼ ‖f‖_{B^{k,2}(x²dx)} + ‖f‖_{H^{k−1}}`,
/// and the embeddings into `B^{2j+1/4,1}` and `B^{1/4,1}(x²dx)` with the
/// constant `1 + (Σ_{l≥1} 4^{(2j+1/4−s)l})^{1/2}`. The weighted reports are
/// produced only for localized members.
pub fn verify_equivalences(ensemble: &Ensemble, cfg: &EquivalenceConfig) -> Result<Vec<EstimateReport>> {
    cfg.validate()?;
    let members = ensemble.members()?;
    let weighted = members.iter().all(|m| matches!(m, Member::Localized(_)));
    let constant = 1.0 + embedding_gap(cfg.j, cfg.embedding_s)?;
    let s2j = cfg.embedding_s - 2.0 * cfg.j as f64;
    let rows = members
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let min_half_period = if weighted {
                cfg.resolution.min_half_period.max(WEIGHTED_HALF_PERIOD)
            } else {
                cfg.resolution.min_half_period
            };
            let grid = static_grid(m, min_half_period, cfg.resolution.grid_factor)?;
            let dec = DyadicDecomposition::new(&grid);
            let f = member_field(m, &grid)?;
            let mk = |lhs: f64, rhs: f64| EstimateRow {
                member: i,
                scan_value: i as f64,
                lhs,
                rhs,
                ratio: lhs / rhs,
                half_period: grid.half_period(),
                points: grid.num_points(),
                time_steps: 0,
                horizon: 0.0,
                guard: 0.0,
            };
            let mut rows = vec![
                mk(sobolev_norm(&f, cfg.s), besov_norm(&dec, &f, cfg.s, Summation::L2)?),
                mk(
                    besov_norm(&dec, &f, 2.0 * cfg.j as f64 + 0.25, Summation::L1)?,
                    constant * besov_norm(&dec, &f, cfg.embedding_s, Summation::L2)?,
                ),
            ];
            if weighted {
                let lower = sobolev_norm(&f, cfg.k as f64 - 1.0);
                rows.push(mk(
                    weighted_sobolev_norm(&f, cfg.k) + lower,
                    weighted_besov_norm(&dec, &f, cfg.k as f64, Summation::L2)? + lower,
                ));
                rows.push(mk(
                    weighted_besov_norm(&dec, &f, 0.25, Summation::L1)?,
                    constant * weighted_besov_norm(&dec, &f, s2j, Summation::L2)?,
                ));
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;

    let bracket = |c: f64| Comparison::Bracket { lo: 1.0 / c, hi: c };
    let below_one = Comparison::Bracket { lo: 0.0, hi: 1.0 };
    let mut drafts = vec![
        Draft::new("sobolev_besov", None, bracket(SOBOLEV_BESOV_BRACKET), None),
        Draft::new("besov_embedding", None, below_one, None),
    ];
    if weighted {
        drafts.push(Draft::new("weighted_sobolev_besov", None, bracket(WEIGHTED_SOBOLEV_BRACKET), None));
        drafts.push(Draft::new("weighted_besov_embedding", None, below_one, None));
    }
    for r in rows {
        for (d, row) in drafts.iter_mut().zip(r) {
            d.rows.push(row);
        }
    }
    drafts.into_iter().map(|d| finish(d, ScanVariable::Member, cfg.j, ensemble.seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Generator, Packet};

    fn row(scan_value: f64, member: usize, lhs: f64, rhs: f64) -> EstimateRow {
        EstimateRow {
            member,
            scan_value,
            lhs,
            rhs,
            ratio: lhs / rhs,
            half_period: 1.0,
            points: 8,
            time_steps: 0,
            horizon: 0.0,
            guard: 0.0,
        }
    }

    fn draft(comparison: Comparison, predicted: f64, rows: Vec<EstimateRow>) -> Draft {
        Draft { name: "t", predicted: Some(predicted), comparison, fit: Some(FitTarget::Ratio), rows }
    }

    #[test]
    fn level_fit_adds_the_displayed_exponent() {
        // ratio ∝ 2^{0.3 l}
        let rows = (1..=4).map(|l| row(l as f64, 0, 2f64.powf(0.3 * l as f64), 1.0)).collect();
        let r = finish(draft(Comparison::AtMost { tolerance: 0.1 }, -1.0, rows), ScanVariable::Level, 1, 0).unwrap();
        assert!((r.fitted_exponent.unwrap() + 0.7).abs() < 1e-12);
        assert!(!r.pass);
        assert!(r.residual.unwrap() < 1e-12);
    }

    #[test]
    fn level_zero_is_left_out_of_the_fit() {
        let mut rows: Vec<_> = (1..=3).map(|l| row(l as f64, 0, 1.0, 1.0)).collect();
        rows.push(row(0.0, 0, 100.0, 1.0));
        let r = finish(draft(Comparison::AtMost { tolerance: 0.1 }, 0.0, rows), ScanVariable::Level, 1, 0).unwrap();
        assert_eq!(r.fitted_exponent, Some(0.0));
        assert_eq!(r.max_ratio, 100.0);
        assert!(r.pass);
    }

    #[test]
    fn worst_member_drives_the_fit() {
        let rows = vec![row(1.0, 0, 1.0, 1.0), row(1.0, 1, 2.0, 1.0), row(2.0, 0, 2.0, 1.0), row(2.0, 1, 4.0, 1.0)];
        let r =
            finish(draft(Comparison::Matches { tolerance: 0.01 }, 1.0, rows), ScanVariable::Frequency, 1, 0).unwrap();
        assert!((r.fitted_exponent.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn non_finite_ratios_fail() {
        let rows = vec![row(1.0, 0, 1.0, 0.0), row(2.0, 0, 1.0, 1.0)];
        let r = finish(draft(Comparison::AtMost { tolerance: 0.1 }, 0.0, rows), ScanVariable::Frequency, 1, 0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.fitted_exponent, None);
    }

    #[test]
    fn bracket_and_equality_rules() {
        let rows = vec![row(0.0, 0, 1.0, 1.0), row(1.0, 1, 1.5, 1.0)];
        let mut d = draft(Comparison::Bracket { lo: 0.5, hi: 2.0 }, 0.0, rows.clone());
        d.fit = None;
        assert!(finish(d, ScanVariable::Member, 0, 0).unwrap().pass);
        let mut d = draft(Comparison::Equality { tolerance: 1e-12 }, 0.0, rows);
        d.fit = None;
        assert!(!finish(d, ScanVariable::Member, 0, 0).unwrap().pass);
    }

    #[test]
    fn csv_has_one_line_per_row_and_a_summary() {
        let rows = vec![row(1.0, 0, 1.0, 2.0), row(2.0, 0, 1.0, 2.0)];
        let r = finish(draft(Comparison::AtMost { tolerance: 0.1 }, 0.0, rows), ScanVariable::Frequency, 1, 9).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], ESTIMATE_CSV_HEADER);
        let cols = ESTIMATE_CSV_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        assert!(lines[3].starts_with("t,summary,"));
        assert!(lines[3].ends_with(",true"));
    }

    #[test]
    fn group_speed_of_the_generic_symbol() {
        let spec = EquationSpec::derivative_of_square(1, 1, 1.0).unwrap();
        let v = max_group_speed(&spec, 10.0);
        assert!((v / 300.0 - 1.0).abs() < 1e-6);
        let spec = EquationSpec::derivative_of_square(2, 1, 1.0).unwrap();
        assert!((max_group_speed(&spec, 2.0) / 80.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fixed_grid_violating_the_guard_is_refused() {
        let spec = EquationSpec::derivative_of_square(1, 1, 1.0).unwrap();
        let p = Profile::single(Packet::new(4.0, 1.0));
        let mut cfg = LabConfig::new(1.0);
        cfg.grid = Some(FixedGrid { half_period: 20.0, points: 512, time_steps: 256 });
        let err = plan(&spec, &Footprint::of(&p), 1.0, &cfg).err().unwrap();
        assert!(err.to_string().contains("anti-wraparound guard"));
        cfg.enforce_guard = false;
        assert!(plan(&spec, &Footprint::of(&p), 1.0, &cfg).unwrap().guard > 1.0);
    }

    #[test]
    fn automatic_grids_respect_the_guard() {
        let spec = EquationSpec::derivative_of_square(1, 1, 1.0).unwrap();
        let p = Profile::single(Packet::new(6.0, 0.5));
        let plan = plan(&spec, &Footprint::of(&p), 0.3, &LabConfig::new(0.3)).unwrap();
        assert!(plan.guard < 1.0);
        assert!(plan.grid.max_wavenumber() > p.resolution_band());
        assert!(plan.steps >= 256);
    }

    #[test]
    fn block_ratios_are_invariant_under_amplitude_scaling() {
        let spec = EquationSpec::derivative_of_square(1, 1, 1.0).unwrap();
        let p = Profile::single(Packet { center: 0.3, ..Packet::new(6.0, 3.0) });
        let cfg = LabConfig::new(0.05);
        let plan = plan(&spec, &Footprint::of(&p), 0.05, &cfg).unwrap();
        let dec = DyadicDecomposition::new(&plan.grid);
        let u0 = p.field(&plan.grid).unwrap();
        let b = dec.lp_block(&u0, 2).unwrap();
        let one = localized_sides(&block_pass(&spec, &plan, &b).unwrap(), 1.0, 2.0, 0.05);
        let three = localized_sides(&block_pass(&spec, &plan, &b.scale_real(-3.0)).unwrap(), 1.0, 2.0, 0.05);
        for ((l1, r1), (l3, r3)) in one.iter().zip(&three) {
            assert!(((l3 / r3) / (l1 / r1) - 1.0).abs() < 1e-12);
        }
        // unitarity within the block
        assert!((one[0].0 / one[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_group_sides_scale_linearly() {
        let spec = EquationSpec::derivative_of_square(1, 1, 1.0).unwrap();
        let p = Profile::single(Packet::new(5.0, 1.5));
        let plan = plan(&spec, &Footprint::of(&p), 0.05, &LabConfig::new(0.05)).unwrap();
        let u0 = p.field(&plan.grid).unwrap();
        let a = free_pass(&spec, &plan, &u0, &[plan.steps]).unwrap();
        let b = free_pass(&spec, &plan, &u0.scale_real(2.5), &[plan.steps]).unwrap();
        for (x, y) in [(a.smoothing, b.smoothing), (a.forcing, b.forcing), (a.maximal4, b.maximal4), (a.d14, b.d14)] {
            assert!((y / x - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bernstein_on_pure_modes_is_exact() {
        let e = Ensemble::new(Generator::PureMode { l: 0 }, 1, 0);
        for n in 0..=3 {
            let r = verify_bernstein(&e, n, &[1, 2, 3, 4], &Resolution::default()).unwrap();
            assert_eq!(r.len(), 1);
            assert!(r[0].rows.iter().all(|row| row.ratio == 1.0));
            assert!(r[0].pass);
        }
    }

    #[test]
    fn pure_mode_sobolev_besov_ratio() {
        let e = Ensemble::new(Generator::PureMode { l: 3 }, 1, 0);
        let r = verify_equivalences(&e, &EquivalenceConfig::new(1.5, 2, 1, 2.75)).unwrap();
        assert_eq!(r.len(), 2);
        // a single block: ⟨8⟩^{3/2} / 8^{3/2}
        let expected = (1.0 + 1.0 / 64.0f64).powf(0.75);
        assert!((r[0].rows[0].ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn scans_need_two_values() {
        let spec = EquationSpec::derivative_of_square(1, 1, 1.0).unwrap();
        let e = Ensemble::new(Generator::Gaussian { spread: 1.0 }, 1, 0);
        let scan = Scan::Dilation { factors: vec![1.0] };
        assert!(verify_smoothing(&spec, &e, &scan, &LabConfig::new(0.1)).is_err());
        assert!(verify_localized(&spec, &e, &[0, 3], None, &LabConfig::new(0.1)).is_err());
    }
}

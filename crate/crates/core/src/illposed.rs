//! Resonance algebra, frequency-localized witness data and the growth of the
//! second Picard iterate.
//!
//! The witness evaluation is done on the frequency side: the second iterate
//! of a pair of narrow bands is an explicit one-dimensional integral, so it is
//! computed by nested Gauss–Legendre quadrature instead of a simulation (a
//! torus resolving bands of width `α = N^{-2j-ε}` would need `L ~ N^{2j+ε}`).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{bilinear, duhamel, duhamel_trajectory, free_evolution, EquationSpec};
use crate::fit::fit_power_law;
use crate::norms::sobolev_norm;
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::solver::{picard_solve, SolveConfig};
use crate::spectral::{coth, SpectralField, TorusGrid};
use crate::trajectory::{TimeGrid, Trajectory};

/// Tolerance on a fitted growth exponent.
pub const SLOPE_TOLERANCE: f64 = 0.1;

const INNER_REL_TOL: f64 = 1e-10;
const MAX_DOUBLINGS: usize = 6;

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Q_{2j}(ξ, ξ₁) = Σ_{l=0}^{2j} ((−1)^l C(2j,l) − 1) ξ^{2j−l} ξ₁^l`, so that
/// `ξ₁^{2j+1} + (ξ−ξ₁)^{2j+1} − ξ^{2j+1} = (ξ−ξ₁) Q_{2j}(ξ, ξ₁)`.
pub fn q_poly(j: u32, xi: f64, xi1: f64) -> f64 {
    let n = 2 * j;
    (0..=n)
        .map(|l| {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            (sign * binomial(n, l) - 1.0) * xi.powi((n - l) as i32) * xi1.powi(l as i32)
        })
        .sum()
}

/// `ω(ξ₁) + ω(ξ−ξ₁) − ω(ξ)`.
pub fn resonance(spec: &EquationSpec, xi: f64, xi1: f64) -> f64 {
    match spec {
        EquationSpec::Generic { j, .. } => {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * (xi - xi1) * q_poly(*j, xi, xi1)
        }
        _ => spec.omega(xi1) + spec.omega(xi - xi1) - spec.omega(xi),
    }
}

/// `ω(x) + ω(η) − ω(x+η)` for `x > 0`, `x + η > 0`, written so that no
/// difference of two large numbers is formed when `|η| ≪ x`.
fn resonance_near(spec: &EquationSpec, x: f64, eta: f64) -> f64 {
    let y = x + eta;
    match spec {
        EquationSpec::Generic { j, .. } => {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * eta * q_poly(*j, y, x)
        }
        EquationSpec::HoBo { a, b, eps, .. } => {
            let dsq = eta * (2.0 * x + eta);
            let dcube = eta * (3.0 * x * x + 3.0 * x * eta + eta * eta);
            spec.omega(eta) - (b * dsq + a * eps * dcube)
        }
        EquationSpec::HoIlw { a1, a2, b, h, eps, .. } => {
            let c0 = coth(h * x);
            let c1 = coth(h * y);
            let dc = -(h * eta).sinh() / ((h * y).sinh() * (h * x).sinh());
            let dsq = eta * (2.0 * x + eta);
            let dcube = eta * (3.0 * x * x + 3.0 * x * eta + eta * eta);
            let quad = c1 * dsq + dc * x * x;
            let cubic = (a1 * c1 * c1 + a2) * dcube + a1 * dc * (c1 + c0) * x.powi(3);
            spec.omega(eta) - (b * quad + eps * cubic)
        }
    }
}

/// `(e^{iθ} − 1)/(i·res)` with `θ = t·res`; the removable singularity at
/// `res = 0` is replaced by its Taylor series.
pub fn oscillatory_factor(res: f64, t: f64) -> Complex64 {
    let theta = t * res;
    if theta.abs() < 1e-3 {
        let th2 = theta * theta;
        return Complex64::new(1.0 - th2 / 6.0, theta / 2.0 - theta * th2 / 24.0) * t;
    }
    (Complex64::from_polar(1.0, theta) - 1.0) / Complex64::new(0.0, res)
}

/// Which second iterate is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessTarget {
    /// `∂_x^k(uv)` for the pure odd-order group, with `k > j`.
    Generic { j: u32, k: u32, s: f64 },
    /// Cross term of the nonlocal quadratic nonlinearity.
    Nonlocal { equation: EquationSpec, s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub target: WitnessTarget,
    /// High frequency `N`.
    pub n: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_time")]
    pub t: f64,
    #[serde(default)]
    pub real_valued: bool,
    #[serde(default = "default_outer")]
    pub outer_nodes: usize,
    #[serde(default = "default_inner")]
    pub inner_nodes: usize,
}

fn default_epsilon() -> f64 {
    0.5
}
fn default_time() -> f64 {
    1.0
}
fn default_outer() -> usize {
    256
}
fn default_inner() -> usize {
    64
}

impl WitnessConfig {
    pub fn new(target: WitnessTarget, n: f64) -> Self {
        Self {
            target,
            n,
            epsilon: default_epsilon(),
            t: default_time(),
            real_valued: false,
            outer_nodes: default_outer(),
            inner_nodes: default_inner(),
        }
    }

    pub fn generic(j: u32, k: u32, s: f64, n: f64) -> Self {
        Self::new(WitnessTarget::Generic { j, k, s }, n)
    }

    pub fn nonlocal(equation: EquationSpec, s: f64, n: f64) -> Self {
        Self::new(WitnessTarget::Nonlocal { equation, s }, n)
    }

    pub fn with_n(&self, n: f64) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.target {
            WitnessTarget::Generic { j, k, s } => {
                if *j == 0 {
                    return Err(Error::param("j", "must be at least 1"));
                }
                if k <= j {
                    return Err(Error::param("k", "the witness needs k > j"));
                }
                if !s.is_finite() {
                    return Err(Error::param("s", "must be finite"));
                }
            }
            WitnessTarget::Nonlocal { equation, s } => {
                equation.validate()?;
                match equation {
                    EquationSpec::HoBo { d, eps, .. } | EquationSpec::HoIlw { d, eps, .. } => {
                        if *d == 0.0 || *eps == 0.0 {
                            return Err(Error::param("equation", "the nonlocal witness needs d·eps ≠ 0"));
                        }
                    }
                    EquationSpec::Generic { .. } => {
                        return Err(Error::param("equation", "nonlocal witness requires the ho_bo or ho_ilw variant"))
                    }
                }
                if !s.is_finite() {
                    return Err(Error::param("s", "must be finite"));
                }
            }
        }
        if !(self.n >= 2.0) || !self.n.is_finite() {
            return Err(Error::param("n", "N must be a finite number ≥ 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param("epsilon", "must lie in (0, 1)"));
        }
        if !self.t.is_finite() {
            return Err(Error::param("t", "must be finite"));
        }
        if self.outer_nodes < 4 {
            return Err(Error::param("outer_nodes", "need at least 4 nodes"));
        }
        if self.inner_nodes < 2 {
            return Err(Error::param("inner_nodes", "need at least 2 nodes"));
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        match &self.target {
            WitnessTarget::Generic { s, .. } | WitnessTarget::Nonlocal { s, .. } => *s,
        }
    }

    /// Band width `α`: `N^{-2j-ε}` for the generic target, `N^{-2-ε}` otherwise.
    pub fn alpha(&self) -> f64 {
        let power = match &self.target {
            WitnessTarget::Generic { j, .. } => 2.0 * *j as f64,
            WitnessTarget::Nonlocal { .. } => 2.0,
        };
        self.n.powf(-power - self.epsilon)
    }

    /// `k − j − ε/2`, or `1 − ε/2` for the nonlocal equations.
    pub fn predicted_exponent(&self) -> f64 {
        match &self.target {
            WitnessTarget::Generic { j, k, .. } => *k as f64 - *j as f64 - self.epsilon / 2.0,
            WitnessTarget::Nonlocal { .. } => 1.0 - self.epsilon / 2.0,
        }
    }

    /// Dispersion used for the phases.
    pub fn equation(&self) -> EquationSpec {
        match &self.target {
            WitnessTarget::Generic { j, .. } => EquationSpec::Generic { j: *j, coeffs: Vec::new() },
            WitnessTarget::Nonlocal { equation, .. } => equation.clone(),
        }
    }
}

/// Interval `[lo, hi]` carrying the constant amplitude `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub lo: f64,
    /// Kept separately from `lo` so that `α ≪ N` survives rounding.
    pub width: f64,
    pub amplitude: f64,
}

impl Band {
    pub fn hi(&self) -> f64 {
        self.lo + self.width
    }

    fn contains(&self, xi: f64) -> bool {
        xi >= self.lo && xi <= self.hi()
    }
}

/// Piecewise-constant Fourier profiles of the witness data.
///
/// For the generic target `φ` is the low part and `ψ` the high part; for the
/// nonlocal equations the single datum is their sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessPair {
    pub alpha: f64,
    pub s: f64,
    pub low: Vec<Band>,
    pub high: Vec<Band>,
}

fn bands_norm(bands: &[Band], s: f64) -> f64 {
    let rule = GaussLegendre::new(32);
    let sq: f64 = bands
        .iter()
        .map(|b| {
            let weight = if s == 0.0 {
                b.width
            } else {
                b.width * rule.integrate(0.0, 1.0, |v| (1.0 + (b.lo + b.width * v).powi(2)).powf(s))
            };
            b.amplitude * b.amplitude * weight
        })
        .sum();
    (sq / (2.0 * PI)).sqrt()
}

impl WitnessPair {
    pub fn low_hat(&self, xi: f64) -> f64 {
        self.low.iter().filter(|b| b.contains(xi)).map(|b| b.amplitude).sum()
    }

    pub fn high_hat(&self, xi: f64) -> f64 {
        self.high.iter().filter(|b| b.contains(xi)).map(|b| b.amplitude).sum()
    }

    /// `‖φ‖_{H^s}` of the low part.
    pub fn low_norm(&self) -> f64 {
        bands_norm(&self.low, self.s)
    }

    pub fn high_norm(&self) -> f64 {
        bands_norm(&self.high, self.s)
    }

    /// Norm of the sum of both parts (their supports are disjoint).
    pub fn combined_norm(&self) -> f64 {
        self.low_norm().hypot(self.high_norm())
    }
}

pub fn witness_pair(cfg: &WitnessConfig) -> Result<WitnessPair> {
    cfg.validate()?;
    let alpha = cfg.alpha();
    let n = cfg.n;
    let s = cfg.s();
    let a_low = alpha.powf(-0.5);
    let a_high = a_low * n.powf(-s);
    let (low, high) = if cfg.real_valued {
        let (l, h) = (a_low / 2.0, a_high / 2.0);
        (
            vec![
                Band { lo: -alpha, width: alpha / 2.0, amplitude: l },
                Band { lo: alpha / 2.0, width: alpha / 2.0, amplitude: l },
            ],
            vec![Band { lo: -n - alpha, width: alpha, amplitude: h }, Band { lo: n, width: alpha, amplitude: h }],
        )
    } else {
        (
            vec![Band { lo: alpha / 2.0, width: alpha / 2.0, amplitude: a_low }],
            vec![Band { lo: n, width: alpha, amplitude: a_high }],
        )
    };
    Ok(WitnessPair { alpha, s, low, high })
}

/// Supports of the low–low, high–high and low–high interactions of the
/// complex witness, in that order.
pub fn interaction_supports(cfg: &WitnessConfig) -> [(f64, f64); 3] {
    let a = cfg.alpha();
    let n = cfg.n;
    [(a, 2.0 * a), (2.0 * n, 2.0 * n + 2.0 * a), (n + a / 2.0, n + 2.0 * a)]
}

/// Low band in units of `α` (`w` range) with its amplitude.
#[derive(Debug, Clone, Copy)]
struct ScaledBand {
    w_lo: f64,
    w_hi: f64,
    amplitude: f64,
}

/// Everything needed to evaluate the cross term near `+N` at `ξ = N + αu`.
struct Evaluator {
    equation: EquationSpec,
    target: WitnessTarget,
    n: f64,
    alpha: f64,
    t: f64,
    high_amplitude: f64,
    low: Vec<ScaledBand>,
    rules: Vec<GaussLegendre>,
}

impl Evaluator {
    fn new(cfg: &WitnessConfig) -> Result<Self> {
        let pair = witness_pair(cfg)?;
        let alpha = pair.alpha;
        let high_amplitude = pair.high.iter().find(|b| b.lo >= 0.0).map(|b| b.amplitude).unwrap();
        let low = pair
            .low
            .iter()
            .map(|b| ScaledBand { w_lo: b.lo / alpha, w_hi: (b.lo + b.width) / alpha, amplitude: b.amplitude })
            .collect();
        let rules = (0..=MAX_DOUBLINGS).map(|d| GaussLegendre::new(cfg.inner_nodes << d)).collect();
        Ok(Self {
            equation: cfg.equation(),
            target: cfg.target.clone(),
            n: cfg.n,
            alpha,
            t: cfg.t,
            high_amplitude,
            low,
            rules,
        })
    }

    /// Values of `u` at which the inner interval changes shape.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.low.iter().flat_map(|b| [b.w_lo, b.w_hi, 1.0 + b.w_lo, 1.0 + b.w_hi]).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }

    fn multiplier(&self, xi: f64, x_high: f64, eta: f64) -> Complex64 {
        match &self.target {
            WitnessTarget::Generic { k, .. } => Complex64::new(0.0, xi).powu(*k),
            WitnessTarget::Nonlocal { .. } => {
                Complex64::new(0.0, f_tilde(&self.equation, xi, eta) + f_tilde(&self.equation, xi, x_high))
            }
        }
    }

    fn inner(&self, u: f64, band: &ScaledBand, rule: &GaussLegendre) -> Complex64 {
        let v0 = (u - band.w_hi).max(0.0);
        let v1 = (u - band.w_lo).min(1.0);
        if v1 <= v0 {
            return Complex64::new(0.0, 0.0);
        }
        let xi = self.n + self.alpha * u;
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, w) in rule.on(v0, v1) {
            let x_high = self.n + self.alpha * v;
            let eta = self.alpha * (u - v);
            let res = resonance_near(&self.equation, x_high, eta);
            acc += self.multiplier(xi, x_high, eta) * oscillatory_factor(res, self.t) * w;
        }
        acc * self.alpha
    }

    /// Adaptive inner integral: doubles the rule until two successive values
    /// agree to `INNER_REL_TOL`.
    fn converged_inner(&self, u: f64, band: &ScaledBand) -> Complex64 {
        let mut prev = self.inner(u, band, &self.rules[0]);
        for rule in &self.rules[1..] {
            let next = self.inner(u, band, rule);
            let scale = next.norm().max(f64::MIN_POSITIVE);
            if (next - prev).norm() <= INNER_REL_TOL * scale {
                return next;
            }
            prev = next;
        }
        prev
    }

    fn transform(&self, u: f64) -> Complex64 {
        let xi = self.n + self.alpha * u;
        let sum: Complex64 =
            self.low.iter().map(|b| self.converged_inner(u, b) * (b.amplitude * self.high_amplitude)).sum();
        let phase = Complex64::from_polar(1.0, self.equation.omega(xi) * self.t);
        phase * sum / (2.0 * PI)
    }
}

/// Symbol of the differentiated quadratic form, with `ξ₁` the frequency of
/// the differentiated factor.
fn f_tilde(spec: &EquationSpec, xi: f64, xi1: f64) -> f64 {
    match spec {
        EquationSpec::HoBo { c, d, eps, .. } => c * xi1 - d * eps * (xi * xi1.abs() + xi.abs() * xi1),
        EquationSpec::HoIlw { c, d, eps, h, .. } => {
            let k1 = if xi1 == 0.0 { 1.0 / h } else { coth(h * xi1) * xi1 };
            c * xi1 - d * eps * (xi * k1 + coth(h * xi) * xi * xi1)
        }
        EquationSpec::Generic { .. } => 0.0,
    }
}

/// Fourier transform of the low–high part of the second iterate at
/// frequency `ξ` near `+N`; exactly zero outside its support.
pub fn second_iterate_transform(cfg: &WitnessConfig, xi: f64) -> Result<Complex64> {
    let ev = Evaluator::new(cfg)?;
    let u = (xi - cfg.n) / ev.alpha;
    Ok(ev.transform(u))
}

/// `‖·‖_{H^s}` of the low–high part of the second iterate at time `cfg.t`.
///
/// For real data the mirror image near `−N` contributes equally.
pub fn witness_norm(cfg: &WitnessConfig) -> Result<f64> {
    let ev = Evaluator::new(cfg)?;
    let s = cfg.s();
    let bp = ev.breakpoints();
    let pieces = bp.len() - 1;
    let per = cfg.outer_nodes.div_ceil(pieces);
    let rule = GaussLegendre::new(per);
    let nodes: Vec<(f64, f64)> = bp.windows(2).flat_map(|w| rule.on(w[0], w[1]).collect::<Vec<_>>()).collect();
    let integral: f64 = nodes
        .par_iter()
        .map(|&(u, w)| {
            let xi = cfg.n + ev.alpha * u;
            let weight = if s == 0.0 { 1.0 } else { (1.0 + xi * xi).powf(s) };
            w * weight * ev.transform(u).norm_sqr()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let mirror = if cfg.real_valued { 2.0 } else { 1.0 };
    Ok((mirror * integral * ev.alpha / (2.0 * PI)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: f64,
    pub alpha: f64,
    pub norm: f64,
}

/// Log-log fit of the witness norm against `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFitReport {
    pub rows: Vec<GrowthRow>,
    pub predicted_exponent: f64,
    pub slope: f64,
    pub residual: f64,
    pub pass: bool,
}

impl GrowthFitReport {
    pub const CSV_HEADER: &'static str = "N,alpha,norm,predicted_exponent,slope,residual";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.n, r.alpha, r.norm, self.predicted_exponent, self.slope, self.residual
            ));
        }
        out
    }
}

/// Default scan `N ∈ {2⁴, …, 2¹⁰}`.
pub fn default_n_values() -> Vec<f64> {
    (4..=10).map(|e| 2f64.powi(e)).collect()
}

pub fn growth_scan(template: &WitnessConfig, n_values: &[f64]) -> Result<GrowthFitReport> {
    if n_values.len() < 4 {
        return Err(Error::param("n_values", "a growth fit needs at least 4 values of N"));
    }
    let rows: Vec<GrowthRow> = n_values
        .par_iter()
        .map(|&n| {
            let cfg = template.with_n(n);
            let norm = witness_norm(&cfg)?;
            Ok(GrowthRow { n, alpha: cfg.alpha(), norm })
        })
        .collect::<Result<_>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let fit = fit_power_law(&ns, &norms)?;
    let predicted = template.predicted_exponent();
    Ok(GrowthFitReport {
        rows,
        predicted_exponent: predicted,
        slope: fit.slope,
        residual: fit.residual,
        pass: (fit.slope - predicted).abs() <= SLOPE_TOLERANCE,
    })
}

/// Second iterate of the generic witness computed on a torus fine enough to
/// resolve `α`: cell-averaged band indicators, exact group, a plain product
/// and trapezoid Duhamel integration in time. Only practical for small `N`.
pub fn grid_oracle_norm(cfg: &WitnessConfig, cells_per_alpha: usize, time_steps: usize) -> Result<f64> {
    let (j, k) = match &cfg.target {
        WitnessTarget::Generic { j, k, .. } => (*j, *k),
        WitnessTarget::Nonlocal { .. } => {
            return Err(Error::param("target", "the grid oracle handles the generic target only"))
        }
    };
    let pair = witness_pair(cfg)?;
    let dxi = pair.alpha / cells_per_alpha as f64;
    let reach = 1.25 * (cfg.n + 2.0 * pair.alpha);
    let m = ((2.0 * reach / dxi).ceil() as usize).next_power_of_two().max(8);
    let grid = TorusGrid::new(PI / dxi, m)?;
    let cell = |bands: &[Band], xi: f64| {
        let total: f64 = bands
            .iter()
            .map(|b| {
                let lo = (xi - dxi / 2.0).max(b.lo);
                let hi = (xi + dxi / 2.0).min(b.hi());
                if hi > lo {
                    b.amplitude * (hi - lo) / dxi
                } else {
                    0.0
                }
            })
            .sum();
        Complex64::new(total, 0.0)
    };
    let phi = SpectralField::from_spectrum(&grid, |xi| cell(&pair.low, xi))?;
    let psi = SpectralField::from_spectrum(&grid, |xi| cell(&pair.high, xi))?;
    let linear = EquationSpec::Generic { j, coeffs: Vec::new() };
    let times = TimeGrid::one_sided(cfg.t, time_steps)?;
    let u = free_evolution(&linear, &phi, times);
    let v = free_evolution(&linear, &psi, times);
    let forcing: Vec<SpectralField<f64>> = u
        .fields()
        .par_iter()
        .zip(v.fields().par_iter())
        .map(|(a, b)| a.pointwise_product(b, false).map(|p| p.derivative(k)))
        .collect::<Result<_>>()?;
    let forcing = Trajectory::new(times, forcing)?;
    let w = duhamel(&linear, &forcing, time_steps)?;
    // The low–low and high–high products vanish for the generic pair, so the
    // whole field is the cross term; real data also carry the −N mirror.
    Ok(sobolev_norm(&w, cfg.s()))
}

/// One row of [`frechet_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetRow {
    pub delta: f64,
    pub converged: bool,
    /// Relative error of the mixed second difference against `2∫U B(Uφ,Uψ)`.
    pub second_error: Option<f64>,
    /// Relative error of `S(δφ)/δ` against `U(t)φ`.
    pub first_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetReport {
    pub rows: Vec<FrechetRow>,
    /// Observed convergence orders between consecutive `δ` values.
    pub second_orders: Vec<f64>,
    pub first_orders: Vec<f64>,
    pub reference_norm: f64,
    pub pass: bool,
}

impl FrechetReport {
    pub const CSV_HEADER: &'static str = "delta,converged,second_error,first_error";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:.12e},{},{},{}\n", r.delta, r.converged, opt(r.second_error), opt(r.first_error)));
        }
        out
    }
}

const NEGLIGIBLE: f64 = 1e-10;
const ORDER_RANGE: (f64, f64) = (0.75, 1.25);

fn orders(rows: &[FrechetRow], pick: impl Fn(&FrechetRow) -> Option<f64>) -> Vec<f64> {
    rows.windows(2)
        .filter_map(|w| {
            let (a, b) = (pick(&w[0])?, pick(&w[1])?);
            if a <= NEGLIGIBLE && b <= NEGLIGIBLE {
                return None;
            }
            Some((a / b).ln() / (w[0].delta / w[1].delta).ln())
        })
        .collect()
}

/// Finite-difference check of the first two Fréchet derivatives of the flow
/// map at the origin, evaluated at the final time of `cfg`.
///
/// Runs whose Picard iteration fails to converge are reported and skipped.
pub fn frechet_check<T: Real>(
    spec: &EquationSpec,
    phi: &SpectralField<T>,
    psi: &SpectralField<T>,
    cfg: &SolveConfig,
    deltas: &[f64],
) -> Result<FrechetReport> {
    phi.same_grid(psi)?;
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::param("deltas", "need at least one positive δ"));
    }
    let times = cfg.time_grid::<T>()?;
    let last = times.len() - 1;
    let u = free_evolution(spec, phi, times);
    let v = free_evolution(spec, psi, times);
    let cross = Trajectory::new(
        times,
        u.fields().par_iter().zip(v.fields().par_iter()).map(|(a, b)| bilinear(spec, a, b)).collect(),
    )?;
    let reference = duhamel_trajectory(spec, &cross).last().scale_real(T::lit(2.0));
    let ref_norm = reference.l2_norm().as_f64();
    let free_phi = u.last().clone();
    let free_norm = free_phi.l2_norm().as_f64();
    let sum = phi.add(psi);

    let rows: Vec<FrechetRow> = deltas
        .iter()
        .map(|&delta| {
            let d = T::lit(delta);
            let mut c = cfg.clone();
            c.tol = cfg.tol.min(1e-9 * delta * delta);
            c.max_iter = cfg.max_iter.max(100);
            let solve = |f: &SpectralField<T>| -> Result<Option<SpectralField<T>>> {
                let r = picard_solve(spec, &f.scale_real(d), &c)?;
                r.converged.then(|| r.trajectory.field(last).cloned()).transpose()
            };
            let (a, b, s) = (solve(phi)?, solve(psi)?, solve(&sum)?);
            let (Some(a), Some(b), Some(s)) = (a, b, s) else {
                return Ok(FrechetRow { delta, converged: false, second_error: None, first_error: None });
            };
            let second = s.sub(&a).sub(&b).scale_real(T::one() / (d * d));
            let diff = second.sub(&reference).l2_norm().as_f64();
            let second_error = if ref_norm > 0.0 { diff / ref_norm } else { diff };
            let first = a.scale_real(T::one() / d).sub(&free_phi).l2_norm().as_f64();
            let first_error = if free_norm > 0.0 { first / free_norm } else { first };
            Ok(FrechetRow { delta, converged: true, second_error: Some(second_error), first_error: Some(first_error) })
        })
        .collect::<Result<_>>()?;

    let second_orders = orders(&rows, |r| r.second_error);
    let first_orders = orders(&rows, |r| r.first_error);
    let in_range = |o: &f64| *o >= ORDER_RANGE.0 && *o <= ORDER_RANGE.1;
    let small = |v: Option<f64>| v.is_some_and(|e| e <= NEGLIGIBLE);
    let all_converged = rows.iter().all(|r| r.converged);
    let second_ok =
        rows.iter().all(|r| small(r.second_error)) || (!second_orders.is_empty() && second_orders.iter().all(in_range));
    let first_ok =
        rows.iter().all(|r| small(r.first_error)) || (!first_orders.is_empty() && first_orders.iter().all(in_range));
    Ok(FrechetReport {
        rows,
        second_orders,
        first_orders,
        reference_norm: ref_norm,
        pass: all_converged && second_ok && first_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn q_poly_values() {
        assert_eq!(q_poly(1, 2.0, 1.0), -6.0);
        assert_eq!(q_poly(2, 2.0, 1.0), -30.0);
        assert_relative_eq!(q_poly(1, 1.7, -0.3), -3.0 * 1.7 * -0.3, epsilon = 1e-14);
    }

    #[test]
    fn factorization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for j in 1..=4 {
            for _ in 0..2000 {
                let xi: f64 = rng.random_range(-3.0..3.0);
                let xi1: f64 = rng.random_range(-3.0..3.0);
                let n = 2 * j as i32 + 1;
                let lhs = xi1.powi(n) + (xi - xi1).powi(n) - xi.powi(n);
                let rhs = (xi - xi1) * q_poly(j, xi, xi1);
                let scale = xi.abs().max(xi1.abs()).max(1e-3).powi(n);
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "j={j} {xi} {xi1}");
            }
        }
    }

    #[test]
    fn diagonal_is_not_divisible() {
        for j in 1..=4 {
            assert_relative_eq!(q_poly(j, 1.5, 1.5), -(2.0 * j as f64 + 1.0) * 1.5f64.powi(2 * j as i32));
        }
    }

    #[test]
    fn resonance_examples() {
        let kdv = EquationSpec::Generic { j: 1, coeffs: vec![] };
        assert_eq!(resonance(&kdv, 3.0, 1.0), -18.0);
        assert_eq!(resonance(&kdv, 3.0, 0.0), 0.0);
        assert_eq!(resonance(&kdv, 3.0, 3.0), 0.0);
        let j2 = EquationSpec::Generic { j: 2, coeffs: vec![] };
        let direct = j2.omega(1.0f64) + j2.omega(2.0f64) - j2.omega(3.0f64);
        assert_relative_eq!(resonance(&j2, 3.0, 1.0), direct, epsilon = 1e-12);
    }

    #[test]
    fn stable_resonance_matches_direct() {
        let specs = [
            EquationSpec::Generic { j: 2, coeffs: vec![] },
            EquationSpec::HoBo { a: 1.0, b: 0.5, c: 1.0, d: 1.0, eps: 0.3 },
            EquationSpec::HoIlw { a1: 1.0, a2: 0.5, b: 1.0, c: 1.0, d: 1.0, h: 0.7, eps: 0.3 },
        ];
        for spec in &specs {
            for (x, eta) in [(3.0, 0.4), (2.0, -0.5), (1.1, 0.05)] {
                let direct = spec.omega(x) + spec.omega(eta) - spec.omega(x + eta);
                assert_relative_eq!(resonance_near(spec, x, eta), direct, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn oscillatory_factor_bounds() {
        assert_eq!(oscillatory_factor(0.0, 2.0), Complex64::new(2.0, 0.0));
        for theta in [1e-9, 1e-4, 0.5, 3.0, 40.0] {
            let f = oscillatory_factor(theta, 1.0);
            assert!(f.norm() <= 1.0 + 1e-15);
        }
        let (a, b) = (oscillatory_factor(9.99e-4, 1.0), oscillatory_factor(1.001e-3, 1.0));
        assert!((a - b).norm() < 1e-5);
        let exact = (Complex64::from_polar(1.0, 1e-3 * 0.999) - 1.0) / Complex64::new(0.0, 0.999e-3);
        assert!((a - exact).norm() < 1e-12);
    }

    #[test]
    fn witness_data_norms() {
        let cfg = WitnessConfig::generic(1, 2, 0.0, 64.0);
        let pair = witness_pair(&cfg).unwrap();
        assert_relative_eq!(pair.low_norm(), (4.0 * PI).powf(-0.5), epsilon = 1e-14);
        assert_relative_eq!(pair.high_norm(), (2.0 * PI).powf(-0.5), epsilon = 1e-12);
        let hs = witness_pair(&WitnessConfig::generic(1, 2, 1.0, 1e4)).unwrap();
        assert_relative_eq!(hs.high_norm(), (2.0 * PI).powf(-0.5), max_relative = 1e-6);
        let real = witness_pair(&WitnessConfig { real_valued: true, ..cfg }).unwrap();
        assert_relative_eq!(real.low_norm(), (8.0 * PI).powf(-0.5), epsilon = 1e-14);
        assert_eq!(real.low_hat(-0.75 * real.alpha), real.low_hat(0.75 * real.alpha));
    }

    #[test]
    fn transform_vanishes_at_time_zero_and_off_support() {
        let cfg = WitnessConfig { t: 0.0, ..WitnessConfig::generic(1, 2, 0.0, 16.0) };
        let a = cfg.alpha();
        assert_eq!(second_iterate_transform(&cfg, 16.0 + a).unwrap().norm(), 0.0);
        let cfg = WitnessConfig::generic(1, 2, 0.0, 16.0);
        assert_eq!(second_iterate_transform(&cfg, 16.0 + 3.0 * a).unwrap().norm(), 0.0);
        assert_eq!(second_iterate_transform(&cfg, 16.0 + 0.25 * a).unwrap().norm(), 0.0);
    }

    #[test]
    fn small_time_limit_is_overlap_length() {
        let t = 1e-7;
        let n = 32.0;
        let cfg = WitnessConfig { t, ..WitnessConfig::generic(1, 2, 0.0, n) };
        let a = cfg.alpha();
        for u in [0.6f64, 0.9, 1.2, 1.7] {
            let overlap = ((u - 0.5).min(1.0) - (u - 1.0).max(0.0)) * a;
            let xi = n + a * u;
            let value = second_iterate_transform(&cfg, xi).unwrap() / t;
            let expected = xi * xi / (a * 2.0 * PI) * overlap;
            assert_relative_eq!(value.norm(), expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn supports_are_disjoint() {
        for n in default_n_values() {
            let s = interaction_supports(&WitnessConfig::generic(1, 2, 0.0, n));
            for i in 0..3 {
                assert!(s[i].0 < s[i].1);
                for k in i + 1..3 {
                    assert!(s[i].1 < s[k].0 || s[k].1 < s[i].0);
                }
            }
        }
    }

    #[test]
    fn norm_independent_of_s() {
        let base = witness_norm(&WitnessConfig::generic(1, 2, 0.0, 64.0)).unwrap();
        for s in [-1.0, 2.0] {
            let v = witness_norm(&WitnessConfig::generic(1, 2, s, 64.0)).unwrap();
            assert_relative_eq!(v, base, max_relative = 1e-2);
        }
    }

    #[test]
    fn norm_grows_in_pre_resonant_window() {
        let mut prev = 0.0;
        for t in [0.01, 0.05, 0.1, 0.2] {
            let v = witness_norm(&WitnessConfig { t, ..WitnessConfig::generic(1, 2, 0.0, 256.0) }).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn generic_growth_slope() {
        let report = growth_scan(&WitnessConfig::generic(1, 2, 0.0, 16.0), &default_n_values()).unwrap();
        assert!(report.pass, "slope {}", report.slope);
        assert!(report.to_csv().lines().count() == 8);
    }

    #[test]
    fn growth_scan_needs_four_points() {
        let cfg = WitnessConfig::generic(1, 2, 0.0, 16.0);
        assert!(growth_scan(&cfg, &[16.0, 32.0, 64.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(WitnessConfig::generic(1, 1, 0.0, 16.0).validate().is_err());
        assert!(WitnessConfig { epsilon: 1.0, ..WitnessConfig::generic(1, 2, 0.0, 16.0) }.validate().is_err());
        let bad = WitnessConfig::nonlocal(EquationSpec::Generic { j: 1, coeffs: vec![] }, 0.0, 16.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn linear_flow_has_no_second_derivative() {
        let spec = EquationSpec::Generic { j: 1, coeffs: vec![] };
        let grid = TorusGrid::new(20.0, 128).unwrap();
        let phi = SpectralField::from_real_fn(&grid, |x: f64| (-x * x).exp()).unwrap();
        let psi = SpectralField::from_real_fn(&grid, |x: f64| (-(x - 1.0).powi(2)).exp()).unwrap();
        let report = frechet_check(&spec, &phi, &psi, &SolveConfig::new(0.5, 0.05), &[1e-2, 1e-3]).unwrap();
        assert!(report.pass);
        assert!(report.rows.iter().all(|r| r.second_error.unwrap() < 1e-10));
    }
}

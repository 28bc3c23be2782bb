//! Picard iteration of the integral equation, and an integrating-factor
//! Runge–Kutta integrator used as an independent oracle.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicDecomposition;
use crate::error::{Error, Result};
use crate::evolution::{apply_phases, free_evolution_with, nonlinearity, picard_map_with, EquationSpec, Propagator};
use crate::norms::{beta, block_table, lambda_s, xt_seminorms, y_norm};
use crate::scalar::Real;
use crate::spectral::SpectralField;
use crate::trajectory::{TimeGrid, Trajectory};

/// Norm in which successive Picard iterates are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormMode {
    Xt,
    Y { s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Time horizon `T`; the iteration runs on `[0, T]`.
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_norm")]
    pub norm: NormMode,
    /// Empirical contraction constant used by [`suggest_t`].
    #[serde(default = "default_c_hat")]
    pub c_hat: f64,
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
fn default_c_hat() -> f64 {
    1.0
}

impl SolveConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            max_iter: default_max_iter(),
            tol: default_tol(),
            norm: default_norm(),
            c_hat: default_c_hat(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if !(self.c_hat > 0.0) {
            return Err(Error::param("c_hat", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        self.time_grid::<f64>().map(|_| ())
    }

    pub fn time_grid<T: Real>(&self) -> Result<TimeGrid<T>> {
        TimeGrid::with_step(T::lit(self.horizon), T::lit(self.dt))
    }
}

/// Outcome of [`picard_solve`].
#[derive(Debug, Clone)]
pub struct SolveReport<T: Real> {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    /// `d_n = ‖u^{(n+1)} − u^{(n)}‖`.
    pub distances: Vec<f64>,
    /// `d_{n+1} / d_n`.
    pub ratios: Vec<f64>,
    pub beta: f64,
    /// `‖F(u) − u‖` for the returned trajectory, when converged.
    pub residual: Option<f64>,
    pub trajectory: Trajectory<T>,
}

/// Serializable part of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub beta: f64,
    pub residual: Option<f64>,
}

impl<T: Real> SolveReport<T> {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            converged: self.converged,
            diverged: self.diverged,
            iterations: self.iterations,
            distances: self.distances.clone(),
            ratios: self.ratios.clone(),
            beta: self.beta,
            residual: self.residual,
        }
    }

    /// `iteration,distance,ratio` rows; the ratio is empty on the first row.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,distance,ratio\n");
        for (n, d) in self.distances.iter().enumerate() {
            let r = if n == 0 { String::new() } else { format!("{:.12e}", self.ratios[n - 1]) };
            out.push_str(&format!("{n},{d:.12e},{r}\n"));
        }
        out
    }
}

struct Distance<T: Real> {
    dec: DyadicDecomposition<T>,
    j: u32,
    mode: NormMode,
    lambda: T,
}

impl<T: Real> Distance<T> {
    fn new(spec: &EquationSpec, u0: &SpectralField<T>, mode: NormMode) -> Result<Self> {
        let dec = DyadicDecomposition::new(u0.grid());
        let j = spec.j();
        let lambda = match mode {
            NormMode::Xt => T::zero(),
            NormMode::Y { s } => lambda_s(&dec, u0, T::lit(s), j)?,
        };
        Ok(Self { dec, j, mode, lambda })
    }

    fn norm(&self, traj: &Trajectory<T>) -> Result<T> {
        let table = block_table(&self.dec, traj)?;
        Ok(match self.mode {
            NormMode::Xt => xt_seminorms(&table, self.j).total(),
            NormMode::Y { s } => y_norm(&table, self.j, T::lit(s), self.lambda),
        })
    }
}

/// Iterates `u^{(n+1)} = F(u^{(n)})` from the free evolution until the
/// distance between iterates drops below `tol`.
///
/// Divergence (three consecutive increases, or a non-finite distance) is
/// reported in the result rather than raised.
pub fn picard_solve<T: Real>(spec: &EquationSpec, u0: &SpectralField<T>, cfg: &SolveConfig) -> Result<SolveReport<T>> {
    spec.validate()?;
    cfg.validate()?;
    let times = cfg.time_grid::<T>()?;
    let prop = Propagator::new(spec, u0.grid());
    let dist = Distance::new(spec, u0, cfg.norm)?;
    let beta_value = beta(&dist.dec, u0, spec.j())?.as_f64();

    let mut current = free_evolution_with(&prop, u0, times);
    let mut distances: Vec<f64> = Vec::new();
    let mut increases = 0usize;
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0usize;
    while iterations < cfg.max_iter {
        let next = picard_map_with(spec, &prop, u0, &current)?;
        iterations += 1;
        let d = dist.norm(&next.sub(&current)?)?.as_f64();
        if let Some(&prev) = distances.last() {
            increases = if d > prev { increases + 1 } else { 0 };
        }
        distances.push(d);
        current = next;
        if !d.is_finite() {
            diverged = true;
            break;
        }
        if d <= cfg.tol {
            converged = true;
            break;
        }
        if increases >= 3 {
            diverged = true;
            break;
        }
    }
    let ratios = distances.windows(2).map(|w| w[1] / w[0]).collect();
    let residual = if converged {
        let again = picard_map_with(spec, &prop, u0, &current)?;
        Some(dist.norm(&again.sub(&current)?)?.as_f64())
    } else {
        None
    };
    Ok(SolveReport {
        converged,
        diverged,
        iterations,
        distances,
        ratios,
        beta: beta_value,
        residual,
        trajectory: current,
    })
}

/// Advisory existence time `1/(4·Ĉ·√β)`.
pub fn suggest_t<T: Real>(u0: &SpectralField<T>, j: u32, cfg: &SolveConfig) -> Result<T> {
    if u0.is_zero() {
        return Err(Error::ZeroData("no existence time can be suggested for zero data".into()));
    }
    let dec = DyadicDecomposition::new(u0.grid());
    let b = beta(&dec, u0, j)?;
    Ok(suggest_t_from_beta(b, T::lit(cfg.c_hat)))
}

pub fn suggest_t_from_beta<T: Real>(beta: T, c_hat: T) -> T {
    T::one() / (T::lit(4.0) * c_hat * beta.sqrt())
}

/// Lawson fourth-order Runge–Kutta with the linear group factored out exactly.
///
/// The horizon may be negative. Returns [`Error::BlowUp`] at the first
/// non-finite state.
pub fn reference_solve<T: Real>(
    spec: &EquationSpec,
    u0: &SpectralField<T>,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    spec.validate()?;
    let mut times = TimeGrid::with_step(Float::abs(horizon), dt)?;
    if horizon < T::zero() {
        times = TimeGrid::one_sided(horizon, times.len() - 1)?;
    }
    let prop = Propagator::new(spec, u0.grid());
    let h = if horizon < T::zero() { -times.dt() } else { times.dt() };
    let full = prop.phases(h);
    let half = prop.phases(h / T::lit(2.0));
    let n = |u: &SpectralField<T>| nonlinearity(spec, u);
    let hh = h / T::lit(2.0);

    let steps = times.len() - 1;
    let mut states = Vec::with_capacity(times.len());
    states.push(u0.clone());
    let mut u = u0.clone();
    for step in 1..=steps {
        let k1 = n(&u);
        let eu_half = apply_phases(&half, &u);
        let mut a = eu_half.clone();
        a.add_scaled(hh, &apply_phases(&half, &k1));
        let k2 = n(&a);
        let mut b = eu_half.clone();
        b.add_scaled(hh, &k2);
        let k3 = n(&b);
        let eu = apply_phases(&full, &u);
        let mut c = eu.clone();
        c.add_scaled(h, &apply_phases(&half, &k3));
        let k4 = n(&c);
        let mut next = eu;
        let sixth = h / T::lit(6.0);
        next.add_scaled(sixth, &apply_phases(&full, &k1));
        next.add_scaled(sixth + sixth, &apply_phases(&half, &k2.add(&k3)));
        next.add_scaled(sixth, &k4);
        if next.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            let t = times.time(if horizon < T::zero() { steps - step } else { step });
            return Err(Error::BlowUp { t: t.as_f64() });
        }
        u = next;
        states.push(u.clone());
    }
    if horizon < T::zero() {
        states.reverse();
    }
    Trajectory::new(times, states)
}

/// Smallest amplitude `a` in `[lo, hi]` (to bisection accuracy) at which the
/// Picard iteration for `a·profile` stops converging.
pub fn amplitude_threshold<T: Real>(
    spec: &EquationSpec,
    profile: &SpectralField<T>,
    cfg: &SolveConfig,
    mut lo: f64,
    mut hi: f64,
    bisections: usize,
) -> Result<f64> {
    let converges = |a: f64| -> Result<bool> { Ok(picard_solve(spec, &profile.scale_real(T::lit(a)), cfg)?.converged) };
    if !converges(lo)? {
        return Err(Error::param("lo", "iteration does not converge at the lower amplitude"));
    }
    if converges(hi)? {
        return Err(Error::param("hi", "iteration still converges at the upper amplitude"));
    }
    for _ in 0..bisections {
        let mid = (lo * hi).sqrt();
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Coefficient;
    use crate::spectral::TorusGrid;
    use approx::assert_relative_eq;
    use num_complex::Complex;

    fn gaussian(g: &TorusGrid<f64>, amp: f64) -> SpectralField<f64> {
        SpectralField::from_real_fn(g, |x| amp * (-x * x / 2.0).exp()).unwrap()
    }

    fn kdv() -> EquationSpec {
        EquationSpec::generic(1, vec![Coefficient::real(0, 1, -6.0)]).unwrap()
    }

    #[test]
    fn zero_data_converges_immediately() {
        let g = TorusGrid::new(20.0, 128).unwrap();
        let r = picard_solve(&kdv(), &SpectralField::zeros(&g), &SolveConfig::new(0.5, 0.05)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.trajectory.fields().iter().all(|f| f.is_zero()));
        assert!(suggest_t(&SpectralField::zeros(&g), 1, &SolveConfig::new(1.0, 0.1)).is_err());
    }

    #[test]
    fn small_data_contracts_geometrically() {
        let g = TorusGrid::new(40.0, 256).unwrap();
        let r = picard_solve(&kdv(), &gaussian(&g, 0.01), &SolveConfig::new(0.5, 0.01)).unwrap();
        assert!(r.converged, "{:?}", r.distances);
        assert!(r.ratios.iter().all(|q| *q < 1.0));
        assert!(r.residual.unwrap() <= 1e-10);
    }

    #[test]
    fn large_data_is_reported_divergent() {
        let g = TorusGrid::new(40.0, 256).unwrap();
        let r = picard_solve(&kdv(), &gaussian(&g, 50.0), &SolveConfig::new(1.0, 0.01)).unwrap();
        assert!(!r.converged);
        assert!(r.diverged);
    }

    #[test]
    fn suggested_time_inverts() {
        let cfg = SolveConfig::new(1.0, 0.1);
        assert_relative_eq!(suggest_t_from_beta(1.0 / 16.0, cfg.c_hat), 1.0);
        let g = TorusGrid::new(40.0, 256).unwrap();
        let t1 = suggest_t(&gaussian(&g, 1.0), 1, &cfg).unwrap();
        let t2 = suggest_t(&gaussian(&g, 2.0), 1, &cfg).unwrap();
        assert_relative_eq!(t2 / t1, 1.0 / 2f64.sqrt(), max_relative = 1e-12);
        let t_small = suggest_t(&gaussian(&g, 1e-12), 1, &cfg).unwrap();
        assert!(t_small > 1e3);
    }

    #[test]
    fn reference_is_exact_on_linear_problems() {
        let g = TorusGrid::new(20.0, 128).unwrap();
        let spec = EquationSpec::generic(1, vec![]).unwrap();
        let u0 = gaussian(&g, 1.0);
        let traj = reference_solve(&spec, &u0, 0.5, 0.05).unwrap();
        let exact = crate::evolution::apply_group(&spec, 0.5, &u0);
        assert!(traj.last().sub(&exact).l2_norm() < 1e-12);
        let back = reference_solve(&spec, &u0, -0.5, 0.05).unwrap();
        let exact = crate::evolution::apply_group(&spec, -0.5, &u0);
        assert!(back.field(0).unwrap().sub(&exact).l2_norm() < 1e-12);
        assert_eq!(back.field(back.times().origin()).unwrap(), &u0);
    }

    #[test]
    fn reference_is_fourth_order() {
        let g = TorusGrid::new(20.0, 128).unwrap();
        let spec = kdv();
        let u0 = gaussian(&g, 0.5);
        let fine = reference_solve(&spec, &u0, 0.5, 0.0025).unwrap();
        let e1 = reference_solve(&spec, &u0, 0.5, 0.05).unwrap().last().sub(fine.last()).l2_norm();
        let e2 = reference_solve(&spec, &u0, 0.5, 0.025).unwrap().last().sub(fine.last()).l2_norm();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let g = TorusGrid::new(10.0, 64).unwrap();
        let spec = EquationSpec::generic(1, vec![Coefficient::real(0, 0, 1.0)]).unwrap();
        let u0 = SpectralField::pure_mode(&g, 0, Complex::new(1.0, 0.0)).unwrap().scale_real(1e3);
        // u' = u² from a large constant blows up at t = 1/u0.
        let e = reference_solve(&spec, &u0, 1.0, 0.01).unwrap_err();
        assert!(matches!(e, Error::BlowUp { .. }));
    }

    #[test]
    fn history_csv_layout() {
        let g = TorusGrid::new(40.0, 256).unwrap();
        let r = picard_solve(&kdv(), &gaussian(&g, 0.01), &SolveConfig::new(0.2, 0.02)).unwrap();
        let csv = r.history_csv();
        assert!(csv.starts_with("iteration,distance,ratio\n0,"));
        assert_eq!(csv.lines().count(), r.distances.len() + 1);
    }
}

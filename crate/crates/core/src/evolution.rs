//! Linear groups, quadratic nonlinearities and the Duhamel operator.

use num_complex::Complex;
use num_traits::{Float, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{coth, sign, SpectralField, TorusGrid};
use crate::trajectory::{TimeGrid, Trajectory};

/// One term `a_{j1,j2} ∂^{j1}u ∂^{j2}u` of the generic nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub j1: u32,
    pub j2: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Coefficient {
    pub fn real(j1: u32, j2: u32, value: f64) -> Self {
        Self { j1, j2, re: value, im: 0.0 }
    }
}

/// Which dispersive equation is being studied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EquationSpec {
    /// `∂_t u + ∂_x^{2j+1} u = Σ a_{j1,j2} ∂^{j1}u ∂^{j2}u`.
    Generic { j: u32, coeffs: Vec<Coefficient> },
    /// Higher-order Benjamin–Ono.
    HoBo { a: f64, b: f64, c: f64, d: f64, eps: f64 },
    /// Higher-order intermediate long wave with depth `h`.
    HoIlw { a1: f64, a2: f64, b: f64, c: f64, d: f64, h: f64, eps: f64 },
}

impl EquationSpec {
    pub fn generic(j: u32, coeffs: Vec<Coefficient>) -> Result<Self> {
        let spec = Self::Generic { j, coeffs };
        spec.validate()?;
        Ok(spec)
    }

    /// Generic equation with nonlinearity `c·∂_x^k(u²)`, expanded by Leibniz' rule.
    pub fn derivative_of_square(j: u32, k: u32, c: f64) -> Result<Self> {
        let mut coeffs = Vec::new();
        let mut binom = 1.0;
        for m in 0..=k {
            coeffs.push(Coefficient::real(m, k - m, c * binom));
            binom = binom * (k - m) as f64 / (m + 1) as f64;
        }
        Self::generic(j, coeffs)
    }

    /// Same dispersion, no nonlinearity.
    pub fn linear_part(&self) -> Self {
        match self {
            Self::Generic { j, .. } => Self::Generic { j: *j, coeffs: Vec::new() },
            Self::HoBo { a, b, eps, .. } => Self::HoBo { a: *a, b: *b, c: 0.0, d: 0.0, eps: *eps },
            Self::HoIlw { a1, a2, b, h, eps, .. } => {
                Self::HoIlw { a1: *a1, a2: *a2, b: *b, c: 0.0, d: 0.0, h: *h, eps: *eps }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        match self {
            Self::Generic { j, coeffs } => {
                if *j < 1 {
                    return Err(Error::param("j", "dispersion index must be at least 1"));
                }
                for c in coeffs {
                    if c.j1 + c.j2 > 2 * j {
                        return Err(Error::param(
                            "coeffs",
                            format!("term ({}, {}) exceeds j1 + j2 <= 2j = {}", c.j1, c.j2, 2 * j),
                        ));
                    }
                    if !c.re.is_finite() || !c.im.is_finite() {
                        return Err(Error::param("coeffs", "coefficients must be finite"));
                    }
                }
                Ok(())
            }
            Self::HoBo { a, b, c, d, eps } => {
                if !a.is_finite() {
                    return Err(Error::param("a", "must be finite"));
                }
                positive("b", *b)?;
                positive("eps", *eps)?;
                if *c < 0.0 || *d < 0.0 {
                    return Err(Error::param("c", "c and d must be nonnegative"));
                }
                Ok(())
            }
            Self::HoIlw { a1, a2, b, c, d, h, eps } => {
                positive("a1", *a1)?;
                positive("a2", *a2)?;
                positive("b", *b)?;
                positive("h", *h)?;
                positive("eps", *eps)?;
                if *c < 0.0 || *d < 0.0 {
                    return Err(Error::param("c", "c and d must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    /// Dispersion index used by the norms; the nonlocal equations behave like `j = 1`.
    pub fn j(&self) -> u32 {
        match self {
            Self::Generic { j, .. } => *j,
            _ => 1,
        }
    }

    pub fn is_linear(&self) -> bool {
        match self {
            Self::Generic { coeffs, .. } => coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0),
            Self::HoBo { c, d, .. } | Self::HoIlw { c, d, .. } => *c == 0.0 && *d == 0.0,
        }
    }

    /// Phase `ω(ξ)` with `û(t) = e^{iω(ξ)t} û(0)` for the linear flow.
    pub fn omega<T: Real>(&self, xi: T) -> T {
        match self {
            Self::Generic { j, .. } => {
                let p = xi.powi(2 * *j as i32 + 1);
                if j % 2 == 1 {
                    p
                } else {
                    -p
                }
            }
            Self::HoBo { a, b, eps, .. } => T::lit(*b) * Float::abs(xi) * xi + T::lit(*a * *eps) * xi.powi(3),
            Self::HoIlw { a1, a2, b, h, eps, .. } => {
                if xi == T::zero() {
                    return T::zero();
                }
                let ct = coth(T::lit(*h) * xi);
                T::lit(*b) * ct * xi * xi + (T::lit(*a1) * ct * ct + T::lit(*a2)) * T::lit(*eps) * xi.powi(3)
            }
        }
    }

    /// Samples of `ω` on the grid.
    pub fn omega_table<T: Real>(&self, grid: &TorusGrid<T>) -> Vec<T> {
        grid.wavenumbers().into_iter().map(|xi| self.omega(xi)).collect()
    }
}

/// `U(t) f`, per-mode multiplication by `e^{iω(ξ)t}`.
pub fn apply_group<T: Real>(spec: &EquationSpec, t: T, f: &SpectralField<T>) -> SpectralField<T> {
    f.map_symbol(|xi| Complex::from_polar(T::one(), spec.omega(xi) * t))
}

/// Precomputed `ω` on one grid, for repeated group applications.
#[derive(Debug, Clone)]
pub struct Propagator<T: Real> {
    grid: TorusGrid<T>,
    omega: Vec<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(spec: &EquationSpec, grid: &TorusGrid<T>) -> Self {
        Self { grid: grid.clone(), omega: spec.omega_table(grid) }
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// `e^{iω(ξ_k)t}` for every mode.
    pub fn phases(&self, t: T) -> Vec<Complex<T>> {
        self.omega.iter().map(|w| Complex::from_polar(T::one(), *w * t)).collect()
    }

    pub fn apply(&self, t: T, f: &SpectralField<T>) -> SpectralField<T> {
        apply_phases(&self.phases(t), f)
    }
}

/// Multiplies each coefficient by the matching phase.
pub fn apply_phases<T: Real>(phases: &[Complex<T>], f: &SpectralField<T>) -> SpectralField<T> {
    let mut out = f.clone();
    for (c, p) in out.coeffs_mut().iter_mut().zip(phases) {
        *c *= *p;
    }
    out
}

fn dealiased_physical<T: Real>(f: &SpectralField<T>) -> Vec<Complex<T>> {
    f.dealiased().to_physical()
}

fn from_product<T: Real>(grid: &TorusGrid<T>, samples: &[Complex<T>]) -> SpectralField<T> {
    SpectralField::from_coeffs_unchecked(grid, grid.forward(samples).expect("grid length")).dealiased()
}

/// Right-hand side nonlinearity of the equation, with 2/3-rule dealiasing.
pub fn nonlinearity<T: Real>(spec: &EquationSpec, u: &SpectralField<T>) -> SpectralField<T> {
    let grid = u.grid();
    match spec {
        EquationSpec::Generic { coeffs, .. } => {
            let active: Vec<&Coefficient> = coeffs.iter().filter(|c| c.re != 0.0 || c.im != 0.0).collect();
            if active.is_empty() {
                return SpectralField::zeros(grid);
            }
            let max_order = active.iter().map(|c| c.j1.max(c.j2)).max().unwrap_or(0);
            let derivs: Vec<Vec<Complex<T>>> = (0..=max_order).map(|n| dealiased_physical(&u.derivative(n))).collect();
            let mut acc = vec![Complex::<T>::zero(); grid.num_points()];
            for c in active {
                let a = Complex::new(T::lit(c.re), T::lit(c.im));
                let (p, q) = (&derivs[c.j1 as usize], &derivs[c.j2 as usize]);
                for ((s, x), y) in acc.iter_mut().zip(p).zip(q) {
                    *s += a * x * y;
                }
            }
            from_product(grid, &acc)
        }
        EquationSpec::HoBo { c, d, eps, .. } => {
            nonlocal_nonlinearity(u, T::lit(*c), T::lit(*d * *eps), |xi| Complex::new(T::zero(), -sign(xi)))
        }
        EquationSpec::HoIlw { c, d, eps, h, .. } => {
            let h = T::lit(*h);
            nonlocal_nonlinearity(u, T::lit(*c), T::lit(*d * *eps), move |xi| {
                if xi == T::zero() {
                    Complex::zero()
                } else {
                    Complex::new(T::zero(), -coth(h * xi))
                }
            })
        }
    }
}

/// `c·u u_x − dε ∂_x(u K u_x + K(u u_x))` for the multiplier `K`.
fn nonlocal_nonlinearity<T: Real>(
    u: &SpectralField<T>,
    c: T,
    de: T,
    k: impl Fn(T) -> Complex<T> + Copy,
) -> SpectralField<T> {
    let grid = u.grid();
    let ux = u.derivative(1);
    let pu = dealiased_physical(u);
    let pux = dealiased_physical(&ux);
    let uux: Vec<_> = pu.iter().zip(&pux).map(|(a, b)| a * b).collect();
    let a = from_product(grid, &uux);
    if de == T::zero() {
        return a.scale_real(c);
    }
    let pkux = dealiased_physical(&ux.map_symbol(k));
    let ukux: Vec<_> = pu.iter().zip(&pkux).map(|(a, b)| a * b).collect();
    let b = from_product(grid, &ukux);
    let inner = b.add(&a.map_symbol(k));
    a.scale_real(c).sub(&inner.derivative(1).scale_real(de))
}

/// Symmetric bilinear form of the nonlinearity, by polarization.
pub fn bilinear<T: Real>(spec: &EquationSpec, u: &SpectralField<T>, v: &SpectralField<T>) -> SpectralField<T> {
    let plus = nonlinearity(spec, &u.add(v));
    let minus = nonlinearity(spec, &u.sub(v));
    plus.sub(&minus).scale_real(T::lit(0.25))
}

fn check_index<T: Real>(forcing: &Trajectory<T>, n: usize) -> Result<()> {
    if n >= forcing.len() {
        return Err(Error::TimeIndex { index: n, len: forcing.len() });
    }
    Ok(())
}

/// `∫_0^{t_n} U(t_n − t') F(t') dt'` by the trapezoid rule on the stored nodes.
pub fn duhamel<T: Real>(spec: &EquationSpec, forcing: &Trajectory<T>, n: usize) -> Result<SpectralField<T>> {
    check_index(forcing, n)?;
    let times = forcing.times();
    let o = times.origin();
    let grid = forcing.grid();
    if n == o {
        return Ok(SpectralField::zeros(grid));
    }
    let prop = Propagator::new(spec, grid);
    let tn = times.time(n);
    let h = if n > o { times.dt() } else { -times.dt() };
    let (lo, hi) = if n > o { (o, n) } else { (n, o) };
    let mut acc = SpectralField::zeros(grid);
    for m in lo..=hi {
        let w = if m == lo || m == hi { h / T::lit(2.0) } else { h };
        let term = prop.apply(tn - times.time(m), forcing.field(m)?);
        acc.add_scaled(w, &term);
    }
    Ok(acc)
}

/// Duhamel integral at every node, by the trapezoid recursion
/// `W_{n+1} = U(h)W_n + (h/2)(U(h)F_n + F_{n+1})` outward from `t = 0`.
pub fn duhamel_trajectory<T: Real>(spec: &EquationSpec, forcing: &Trajectory<T>) -> Trajectory<T> {
    let prop = Propagator::new(spec, forcing.grid());
    duhamel_with(&prop, forcing)
}

pub(crate) fn duhamel_with<T: Real>(prop: &Propagator<T>, forcing: &Trajectory<T>) -> Trajectory<T> {
    let times = *forcing.times();
    let o = times.origin();
    let len = times.len();
    let grid = forcing.grid();
    let mut out: Vec<Option<SpectralField<T>>> = vec![None; len];
    out[o] = Some(SpectralField::zeros(grid));
    let dt = times.dt();
    for (dir, h) in [(1isize, dt), (-1isize, -dt)] {
        let phases = prop.phases(h);
        let mut w = SpectralField::zeros(grid);
        let mut n = o as isize;
        loop {
            let next = n + dir;
            if next < 0 || next >= len as isize {
                break;
            }
            let f_n = &forcing.fields()[n as usize];
            let f_next = &forcing.fields()[next as usize];
            let half = h / T::lit(2.0);
            let mut stepped = apply_phases(&phases, &w.add(&f_n.scale_real(half)));
            stepped.add_scaled(half, f_next);
            w = stepped;
            out[next as usize] = Some(w.clone());
            n = next;
        }
    }
    let fields = out.into_iter().map(|f| f.expect("every node visited")).collect();
    Trajectory::new(times, fields).expect("consistent lengths")
}

/// Streaming trapezoid Duhamel integral on a one-sided grid starting at `t = 0`.
#[derive(Debug, Clone)]
pub struct DuhamelStream<T: Real> {
    phases: Vec<Complex<T>>,
    half: T,
    state: SpectralField<T>,
    last_forcing: Option<SpectralField<T>>,
}

impl<T: Real> DuhamelStream<T> {
    pub fn new(prop: &Propagator<T>, h: T) -> Self {
        Self {
            phases: prop.phases(h),
            half: h / T::lit(2.0),
            state: SpectralField::zeros(prop.grid()),
            last_forcing: None,
        }
    }

    /// Feeds `F(t_n)` and returns the integral up to `t_n`.
    pub fn push(&mut self, forcing: SpectralField<T>) -> &SpectralField<T> {
        if let Some(prev) = self.last_forcing.take() {
            let mut next = apply_phases(&self.phases, &self.state.add(&prev.scale_real(self.half)));
            next.add_scaled(self.half, &forcing);
            self.state = next;
        }
        self.last_forcing = Some(forcing);
        &self.state
    }
}

/// Free evolution `t_n ↦ U(t_n) u0` on the nodes of `times`.
pub fn free_evolution<T: Real>(spec: &EquationSpec, u0: &SpectralField<T>, times: TimeGrid<T>) -> Trajectory<T> {
    let prop = Propagator::new(spec, u0.grid());
    free_evolution_with(&prop, u0, times)
}

pub(crate) fn free_evolution_with<T: Real>(
    prop: &Propagator<T>,
    u0: &SpectralField<T>,
    times: TimeGrid<T>,
) -> Trajectory<T> {
    let fields = times.times().into_par_iter().map(|t| prop.apply(t, u0)).collect();
    Trajectory::new(times, fields).expect("consistent lengths")
}

/// One application of the integral map: `U(t)u0 + ∫_0^t U(t−t') N(u(t')) dt'`.
pub fn picard_map<T: Real>(spec: &EquationSpec, u0: &SpectralField<T>, traj: &Trajectory<T>) -> Result<Trajectory<T>> {
    let prop = Propagator::new(spec, u0.grid());
    picard_map_with(spec, &prop, u0, traj)
}

pub(crate) fn picard_map_with<T: Real>(
    spec: &EquationSpec,
    prop: &Propagator<T>,
    u0: &SpectralField<T>,
    traj: &Trajectory<T>,
) -> Result<Trajectory<T>> {
    if traj.grid() != u0.grid() {
        return Err(Error::GridMismatch);
    }
    let free = free_evolution_with(prop, u0, *traj.times());
    if spec.is_linear() {
        return Ok(free);
    }
    let forcing = traj.map(|u| nonlinearity(spec, u));
    let integral = duhamel_with(prop, &forcing);
    free.add(&integral)
}

//! Functions on a large torus `[-L, L)` standing in for the real line.
//!
//! Fields are stored frequency-side. The discrete transform is scaled so that
//! a coefficient is a sample of the continuum transform
//! `f̂(ξ) = ∫ f(x) e^{-iξx} dx`:
//!
//! ```text
//! f̂_k = Δx Σ_m f(x_m) e^{-i ξ_k x_m},      f(x_m) = (1/2L) Σ_k f̂_k e^{i ξ_k x_m}
//! ```
//!
//! with `x_m = -L + mΔx`, `ξ_k = πk/L`. Plancherel then reads
//! `‖f‖²_{L²} = (1/2L) Σ |f̂_k|² = Δx Σ |f(x_m)|²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, Zero};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

struct Plans<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

/// Uniform periodic grid on `[-L, L)` with `M` points.
#[derive(Clone)]
pub struct TorusGrid<T: Real> {
    half_period: T,
    num_points: usize,
    plans: Arc<Plans<T>>,
}

impl<T: Real> fmt::Debug for TorusGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("half_period", &self.half_period)
            .field("num_points", &self.num_points)
            .finish()
    }
}

impl<T: Real> PartialEq for TorusGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.num_points == other.num_points && self.half_period == other.half_period
    }
}

impl<T: Real> TorusGrid<T> {
    /// `num_points` must be a power of two no smaller than 8 and `half_period` positive.
    pub fn new(half_period: T, num_points: usize) -> Result<Self> {
        if !(half_period > T::zero()) || !half_period.is_finite() {
            return Err(Error::Grid(format!("half_period must be positive and finite, got {half_period}")));
        }
        if num_points < 8 || !num_points.is_power_of_two() {
            return Err(Error::Grid(format!("num_points must be a power of two >= 8, got {num_points}")));
        }
        let mut planner = FftPlanner::new();
        let plans =
            Plans { forward: planner.plan_fft_forward(num_points), inverse: planner.plan_fft_inverse(num_points) };
        Ok(Self { half_period, num_points, plans: Arc::new(plans) })
    }

    #[inline]
    pub fn half_period(&self) -> T {
        self.half_period
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    /// Spatial step `Δx = 2L/M`.
    #[inline]
    pub fn spacing(&self) -> T {
        T::lit(2.0) * self.half_period / T::count(self.num_points)
    }

    /// Wavenumber spacing `π/L`.
    #[inline]
    pub fn frequency_step(&self) -> T {
        T::PI() / self.half_period
    }

    /// Signed mode number `k ∈ [-M/2, M/2)` stored at `index`.
    #[inline]
    pub fn mode_number(&self, index: usize) -> i64 {
        let m = self.num_points;
        if index < m / 2 {
            index as i64
        } else {
            index as i64 - m as i64
        }
    }

    /// Storage index of the signed mode `k`.
    pub fn index_of_mode(&self, k: i64) -> Result<usize> {
        let half = (self.num_points / 2) as i64;
        if k < -half || k >= half {
            return Err(Error::param("mode", format!("mode {k} outside [-{half}, {half})")));
        }
        Ok(if k >= 0 { k as usize } else { (k + self.num_points as i64) as usize })
    }

    #[inline]
    pub fn wavenumber(&self, index: usize) -> T {
        T::from_i64(self.mode_number(index)).unwrap() * self.frequency_step()
    }

    pub fn wavenumbers(&self) -> Vec<T> {
        (0..self.num_points).map(|i| self.wavenumber(i)).collect()
    }

    /// Largest `|ξ_k|` on the grid (the unpaired mode `k = -M/2`).
    pub fn max_wavenumber(&self) -> T {
        T::count(self.num_points / 2) * self.frequency_step()
    }

    #[inline]
    pub fn coordinate(&self, m: usize) -> T {
        -self.half_period + T::count(m) * self.spacing()
    }

    pub fn coordinates(&self) -> Vec<T> {
        (0..self.num_points).map(|m| self.coordinate(m)).collect()
    }

    /// Whether the 2/3 rule keeps the mode stored at `index`.
    #[inline]
    pub fn within_dealias_band(&self, index: usize) -> bool {
        3 * self.mode_number(index).unsigned_abs() as usize <= self.num_points
    }

    /// Samples → continuum-normalised coefficients.
    pub fn forward(&self, samples: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(samples.len())?;
        let mut buf = samples.to_vec();
        self.plans.forward.process(&mut buf);
        let dx = self.spacing();
        for (i, c) in buf.iter_mut().enumerate() {
            // e^{-iξ_k x_0} = (-1)^k and k ≡ index (mod M) with M even.
            let sign = if i % 2 == 0 { dx } else { -dx };
            *c = c.scale(sign);
        }
        Ok(buf)
    }

    /// Continuum-normalised coefficients → samples.
    pub fn inverse(&self, coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(coeffs.len())?;
        let scale = T::one() / (T::lit(2.0) * self.half_period);
        let mut buf: Vec<Complex<T>> =
            coeffs.iter().enumerate().map(|(i, c)| c.scale(if i % 2 == 0 { scale } else { -scale })).collect();
        self.plans.inverse.process(&mut buf);
        Ok(buf)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_points {
            return Err(Error::Length { expected: self.num_points, got: len });
        }
        Ok(())
    }
}

/// Fourier multiplier `ξ ↦ m(ξ)` with an explicit value at `ξ = 0`.
#[derive(Clone)]
pub struct Multiplier<T: Real> {
    name: String,
    symbol: Arc<dyn Fn(T) -> Complex<T> + Send + Sync>,
    at_zero: Complex<T>,
}

impl<T: Real> fmt::Debug for Multiplier<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Multiplier").field("name", &self.name).field("at_zero", &self.at_zero).finish()
    }
}

impl<T: Real> Multiplier<T> {
    pub fn new(
        name: impl Into<String>,
        at_zero: Complex<T>,
        symbol: impl Fn(T) -> Complex<T> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), symbol: Arc::new(symbol), at_zero }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, xi: T) -> Complex<T> {
        if xi == T::zero() {
            self.at_zero
        } else {
            (self.symbol)(xi)
        }
    }

    pub fn identity() -> Self {
        Self::new("1", Complex::new(T::one(), T::zero()), |_| Complex::new(T::one(), T::zero()))
    }

    /// `(iξ)^n`.
    pub fn derivative(n: u32) -> Self {
        let at_zero = if n == 0 { Complex::new(T::one(), T::zero()) } else { Complex::zero() };
        Self::new(format!("(iξ)^{n}"), at_zero, move |xi| Complex::new(T::zero(), xi).powu(n))
    }

    /// `|ξ|^σ`, the symbol of `D^σ`.
    pub fn fractional(sigma: T) -> Self {
        let at_zero = if sigma == T::zero() { Complex::new(T::one(), T::zero()) } else { Complex::zero() };
        Self::new(format!("|ξ|^{sigma}"), at_zero, move |xi| Complex::new(Float::abs(xi).powf(sigma), T::zero()))
    }

    /// Hilbert transform, `-i sgn ξ` with `sgn 0 = 0`.
    pub fn hilbert() -> Self {
        Self::new("-i sgn ξ", Complex::zero(), |xi| Complex::new(T::zero(), -Float::signum(xi)))
    }

    /// `F_h = -i coth(hξ)`, zero at the origin.
    pub fn ilw(depth: T) -> Self {
        Self::new(format!("-i coth({depth}ξ)"), Complex::zero(), move |xi| Complex::new(T::zero(), -coth(depth * xi)))
    }

    /// `e^{iω(ξ)t}` for a real phase function `ω`.
    pub fn phase(omega: impl Fn(T) -> T + Send + Sync + 'static, t: T) -> Self {
        let at_zero = Complex::from_polar(T::one(), omega(T::zero()) * t);
        Self::new("e^{iωt}", at_zero, move |xi| Complex::from_polar(T::one(), omega(xi) * t))
    }

    /// Pointwise product of two symbols.
    pub fn compose(&self, other: &Self) -> Self {
        let (a, b) = (self.symbol.clone(), other.symbol.clone());
        Self {
            name: format!("{}·{}", self.name, other.name),
            symbol: Arc::new(move |xi| a(xi) * b(xi)),
            at_zero: self.at_zero * other.at_zero,
        }
    }
}

/// `coth` without the cancellation of `cosh/sinh` for large arguments.
pub fn coth<T: Real>(x: T) -> T {
    T::one() / x.tanh()
}

/// Complex Fourier coefficients of a function on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T: Real> {
    grid: TorusGrid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: &TorusGrid<T>) -> Self {
        Self { grid: grid.clone(), coeffs: vec![Complex::zero(); grid.num_points()] }
    }

    pub fn from_coeffs(grid: &TorusGrid<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        grid.check_len(coeffs.len())?;
        if let Some(index) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFiniteData { index });
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    pub fn from_physical(grid: &TorusGrid<T>, samples: &[Complex<T>]) -> Result<Self> {
        if let Some(index) = samples.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFiniteData { index });
        }
        Ok(Self { grid: grid.clone(), coeffs: grid.forward(samples)? })
    }

    /// Skips the finiteness check; for internal kernels that report blow-up themselves.
    pub(crate) fn from_coeffs_unchecked(grid: &TorusGrid<T>, coeffs: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.num_points());
        Self { grid: grid.clone(), coeffs }
    }

    /// Samples `f` at the grid coordinates.
    pub fn from_fn(grid: &TorusGrid<T>, f: impl FnMut(T) -> Complex<T>) -> Result<Self> {
        let samples: Vec<_> = grid.coordinates().into_iter().map(f).collect();
        Self::from_physical(grid, &samples)
    }

    /// Real-valued samples.
    pub fn from_real_fn(grid: &TorusGrid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_fn(grid, |x| Complex::new(f(x), T::zero()))
    }

    /// `amplitude · e^{iξ_k x}` for the signed mode `k`.
    pub fn pure_mode(grid: &TorusGrid<T>, k: i64, amplitude: Complex<T>) -> Result<Self> {
        let idx = grid.index_of_mode(k)?;
        let mut f = Self::zeros(grid);
        f.coeffs[idx] = amplitude.scale(T::lit(2.0) * grid.half_period());
        Ok(f)
    }

    /// Coefficients given as a function of the wavenumber.
    pub fn from_spectrum(grid: &TorusGrid<T>, f: impl FnMut(T) -> Complex<T>) -> Result<Self> {
        let coeffs = grid.wavenumbers().into_iter().map(f).collect();
        Self::from_coeffs(grid, coeffs)
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex<T>> {
        self.coeffs
    }

    pub fn to_physical(&self) -> Vec<Complex<T>> {
        self.grid.inverse(&self.coeffs).expect("field length matches its grid")
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// `‖f‖_{L²}` from the coefficients.
    pub fn l2_norm(&self) -> T {
        let sum: T = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (sum / (T::lit(2.0) * self.grid.half_period())).sqrt()
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Per-mode multiplication by `m(ξ_k)`.
    pub fn apply_multiplier(&self, m: &Multiplier<T>) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (i, c) in self.coeffs.iter().enumerate() {
            let xi = self.grid.wavenumber(i);
            let v = m.eval(xi);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFiniteSymbol { symbol: m.name().to_string(), xi: xi.as_f64() });
            }
            coeffs.push(*c * v);
        }
        Ok(Self { grid: self.grid.clone(), coeffs })
    }

    /// Multiplies by a symbol known to be finite on the grid.
    pub fn map_symbol(&self, symbol: impl Fn(T) -> Complex<T>) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| *c * symbol(self.grid.wavenumber(i))).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    /// Multiplies by a real symbol known to be finite on the grid.
    pub fn map_real_symbol(&self, symbol: impl Fn(T) -> T) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c.scale(symbol(self.grid.wavenumber(i)))).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    /// `∂ₓⁿ f`.
    pub fn derivative(&self, n: u32) -> Self {
        if n == 0 {
            return self.clone();
        }
        self.map_symbol(|xi| Complex::new(T::zero(), xi).powu(n))
    }

    /// `D^σ f`, symbol `|ξ|^σ`.
    pub fn fractional_derivative(&self, sigma: T) -> Self {
        if sigma == T::zero() {
            return self.clone();
        }
        self.map_real_symbol(|xi| if xi == T::zero() { T::zero() } else { Float::abs(xi).powf(sigma) })
    }

    /// `H f`, symbol `-i sgn ξ`.
    pub fn hilbert(&self) -> Self {
        self.map_symbol(|xi| Complex::new(T::zero(), -sign(xi)))
    }

    /// Physical-space product. With `dealias`, modes with `|k| > M/3` are
    /// removed from both factors and from the result.
    pub fn pointwise_product(&self, other: &Self, dealias: bool) -> Result<Self> {
        self.same_grid(other)?;
        let (a, b) = if dealias { (self.dealiased(), other.dealiased()) } else { (self.clone(), other.clone()) };
        let pa = a.to_physical();
        let pb = b.to_physical();
        let prod: Vec<_> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let out = Self { grid: self.grid.clone(), coeffs: self.grid.forward(&prod)? };
        Ok(if dealias { out.dealiased() } else { out })
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if !self.grid.within_dealias_band(i) {
                *c = Complex::zero();
            }
        }
        out
    }

    /// `x·f` with the centred coordinate `x_m ∈ [-L, L)`.
    ///
    /// Only meaningful when [`boundary_mass_fraction`](Self::boundary_mass_fraction)
    /// is below `1e-6`.
    pub fn multiply_by_x(&self) -> Self {
        let mut phys = self.to_physical();
        for (m, v) in phys.iter_mut().enumerate() {
            *v = v.scale(self.grid.coordinate(m));
        }
        Self { grid: self.grid.clone(), coeffs: self.grid.forward(&phys).expect("length preserved") }
    }

    /// Share of `‖f‖²_{L²}` carried by `|x| > 0.9L`; zero for the zero field.
    pub fn boundary_mass_fraction(&self) -> T {
        boundary_mass_of_samples(&self.grid, &self.to_physical())
    }

    /// `Re f`, i.e. `(f̂(ξ) + conj f̂(-ξ)) / 2`.
    pub fn real_projection(&self) -> Self {
        let m = self.grid.num_points();
        let half = T::lit(0.5);
        let coeffs = (0..m)
            .map(|i| {
                let mirror = (m - i) % m;
                (self.coeffs[i] + self.coeffs[mirror].conj()).scale(half)
            })
            .collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        Self { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    pub fn scale_real(&self, factor: T) -> Self {
        Self { grid: self.grid.clone(), coeffs: self.coeffs.iter().map(|c| c.scale(factor)).collect() }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, factor: T, other: &Self) {
        assert!(self.grid == other.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b.scale(factor);
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Largest coefficient modulus difference.
    pub fn max_coeff_distance(&self, other: &Self) -> T {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }
}

/// `sgn` with `sgn(0) = 0`.
#[inline]
pub fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

pub(crate) fn boundary_mass_of_samples<T: Real>(grid: &TorusGrid<T>, samples: &[Complex<T>]) -> T {
    let edge = T::lit(0.9) * grid.half_period();
    let mut total = T::zero();
    let mut outer = T::zero();
    for (m, v) in samples.iter().enumerate() {
        let w = v.norm_sqr();
        total += w;
        if Float::abs(grid.coordinate(m)) > edge {
            outer += w;
        }
    }
    if total == T::zero() {
        T::zero()
    } else {
        outer / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(l: f64, m: usize) -> TorusGrid<f64> {
        TorusGrid::new(l, m).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::<f64>::new(1.0, 6).is_err());
        assert!(TorusGrid::<f64>::new(1.0, 4).is_err());
        assert!(TorusGrid::<f64>::new(-1.0, 64).is_err());
        assert!(TorusGrid::<f64>::new(f64::NAN, 64).is_err());
    }

    #[test]
    fn wavenumbers_contain_zero_and_one_unpaired_mode() {
        let g = grid(PI, 16);
        let ks = g.wavenumbers();
        assert_eq!(ks[0], 0.0);
        assert_relative_eq!(ks[8], -8.0);
        for i in 1..8 {
            assert_relative_eq!(ks[i], -ks[16 - i]);
        }
    }

    #[test]
    fn zero_coefficients_give_zero_samples() {
        let g = grid(PI, 32);
        let f = SpectralField::zeros(&g);
        assert!(f.to_physical().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_mode_samples_and_plancherel() {
        let g = grid(PI, 32);
        let f = SpectralField::pure_mode(&g, 1, Complex::new(1.0, 0.0)).unwrap();
        for (m, v) in f.to_physical().iter().enumerate() {
            let x = g.coordinate(m);
            assert!((v - Complex::new(x.cos(), x.sin())).norm() < 1e-14);
        }
        assert_relative_eq!(f.l2_norm(), (2.0 * PI).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn derivative_examples() {
        let g = grid(PI, 32);
        let f = SpectralField::pure_mode(&g, 2, Complex::new(1.0, 0.0)).unwrap();
        let df = f.derivative(1);
        let expect = f.scale(Complex::new(0.0, 2.0));
        assert!(df.max_coeff_distance(&expect) < 1e-12);
        assert_eq!(f.derivative(0), f);

        let g = grid(PI, 64);
        let f = SpectralField::pure_mode(&g, 16, Complex::new(1.0, 0.0)).unwrap();
        let d = f.fractional_derivative(0.25);
        assert!(d.max_coeff_distance(&f.scale_real(2.0)) < 1e-12);
    }

    #[test]
    fn hilbert_of_cosine_is_sine() {
        let g = grid(PI, 32);
        let f = SpectralField::from_real_fn(&g, |x| x.cos()).unwrap();
        let h = f.apply_multiplier(&Multiplier::hilbert()).unwrap();
        for (m, v) in h.to_physical().iter().enumerate() {
            assert!((v.re - g.coordinate(m).sin()).abs() < 1e-13);
            assert!(v.im.abs() < 1e-13);
        }
    }

    #[test]
    fn identity_multiplier_and_composition() {
        let g = grid(3.0, 64);
        let f = SpectralField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        assert_eq!(f.apply_multiplier(&Multiplier::identity()).unwrap(), f);
        let a = Multiplier::derivative(1);
        let b = Multiplier::fractional(0.5);
        let ab = f.apply_multiplier(&a).unwrap().apply_multiplier(&b).unwrap();
        let ba = f.apply_multiplier(&b).unwrap().apply_multiplier(&a).unwrap();
        let both = f.apply_multiplier(&a.compose(&b)).unwrap();
        assert!(ab.max_coeff_distance(&ba) < 1e-14);
        assert!(ab.max_coeff_distance(&both) < 1e-14);
    }

    #[test]
    fn non_finite_symbol_names_wavenumber() {
        let g = grid(PI, 16);
        let f = SpectralField::from_real_fn(&g, |x| x.cos()).unwrap();
        let bad = Multiplier::new("1/ξ", Complex::new(f64::INFINITY, 0.0), |xi| Complex::new(1.0 / (xi - 1.0), 0.0));
        match f.apply_multiplier(&bad) {
            Err(Error::NonFiniteSymbol { xi, .. }) => assert_eq!(xi, 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_mode_product_is_exact() {
        let g = grid(PI, 32);
        let a = SpectralField::pure_mode(&g, 1, Complex::new(1.0, 0.0)).unwrap();
        let b = SpectralField::pure_mode(&g, 2, Complex::new(1.0, 0.0)).unwrap();
        let c = SpectralField::pure_mode(&g, 3, Complex::new(1.0, 0.0)).unwrap();
        for dealias in [true, false] {
            let p = a.pointwise_product(&b, dealias).unwrap();
            assert!(p.max_coeff_distance(&c) < 1e-12);
        }
        let z = a.pointwise_product(&SpectralField::zeros(&g), true).unwrap();
        assert!(z.is_zero() || z.l2_norm() == 0.0);
    }

    #[test]
    fn product_grid_mismatch_is_error() {
        let a = SpectralField::<f64>::zeros(&grid(PI, 32));
        let b = SpectralField::<f64>::zeros(&grid(PI, 64));
        assert_eq!(a.pointwise_product(&b, true), Err(Error::GridMismatch));
    }

    #[test]
    fn gaussian_boundary_mass_and_first_moment() {
        let g = grid(20.0 * PI, 1024);
        let f = SpectralField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        assert!(f.boundary_mass_fraction() < 1e-12);
        // ∫x²e^{-2x²} / ∫e^{-2x²} = 1/4.
        let ratio = f.multiply_by_x().l2_norm() / f.l2_norm();
        assert_relative_eq!(ratio, 0.5, max_relative = 1e-10);
        assert_eq!(SpectralField::zeros(&g).multiply_by_x().l2_norm(), 0.0);
    }

    #[test]
    fn real_projection_examples() {
        let g = grid(8.0, 128);
        let real = SpectralField::from_real_fn(&g, |x| (-x * x).exp() * x.cos()).unwrap();
        assert!(real.real_projection().max_coeff_distance(&real) < 1e-12);

        let imag = SpectralField::from_fn(&g, |x| Complex::new(0.0, (-x * x).exp())).unwrap();
        assert!(imag.real_projection().l2_norm() < 1e-13);

        // indicator on a band of positive modes
        let f = SpectralField::from_spectrum(&g, |xi| {
            if (3.0..=4.0).contains(&xi) {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .unwrap();
        let p = f.real_projection();
        for (i, c) in p.coeffs().iter().enumerate() {
            let xi = g.wavenumber(i).abs();
            let expect = if (3.0..=4.0).contains(&xi) { 0.5 } else { 0.0 };
            assert!((c - Complex::new(expect, 0.0)).norm() < 1e-15);
        }
        assert!(p.to_physical().iter().all(|v| v.im.abs() < 1e-13));
    }

    #[test]
    fn single_precision_plancherel() {
        let g = TorusGrid::<f32>::new(10.0, 256).unwrap();
        let f = SpectralField::from_real_fn(&g, |x| (-x * x).exp()).unwrap();
        let phys: f32 = f.to_physical().iter().map(|v| v.norm_sqr()).sum::<f32>() * g.spacing();
        assert!((phys.sqrt() - f.l2_norm()).abs() / f.l2_norm() < 1e-5);
    }
}

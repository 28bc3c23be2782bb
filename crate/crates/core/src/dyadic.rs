//! Littlewood–Paley cutoffs and block operators.
//!
//! `χ` is 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 2` and on the transition band
//! `χ = g(2-|ξ|) / (g(2-|ξ|) + g(|ξ|-1))` with `g(t) = e^{-1/t}`.
//! Blocks are `ψ_l(ξ) = ψ(2^{-l}ξ)` with `ψ(η) = χ(η) - χ(2η)`.

use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{sign, SpectralField, TorusGrid};

/// Low-frequency cutoff `χ`.
pub fn chi<T: Real>(xi: T) -> T {
    let r = Float::abs(xi);
    let one = T::one();
    let two = T::lit(2.0);
    if r <= one {
        one
    } else if r >= two {
        T::zero()
    } else {
        // 1 / (1 + g(r-1)/g(2-r)) = 1 / (1 + e^{1/(2-r) - 1/(r-1)})
        let a = two - r;
        let b = r - one;
        one / (one + (one / a - one / b).exp())
    }
}

/// Derivative of `χ` with respect to `ξ`.
pub fn chi_prime<T: Real>(xi: T) -> T {
    let r = Float::abs(xi);
    let one = T::one();
    let two = T::lit(2.0);
    if r <= one || r >= two {
        return T::zero();
    }
    let c = chi(r);
    if c == T::zero() || c == one {
        return T::zero();
    }
    let a = two - r;
    let b = r - one;
    let dr = -c * (one - c) * (one / (a * a) + one / (b * b));
    dr * sign(xi)
}

/// `ψ(η) = χ(η) - χ(2η)`, supported in `1/2 ≤ |η| ≤ 2`.
pub fn psi<T: Real>(eta: T) -> T {
    chi(eta) - chi(T::lit(2.0) * eta)
}

pub fn psi_prime<T: Real>(eta: T) -> T {
    let two = T::lit(2.0);
    chi_prime(eta) - two * chi_prime(two * eta)
}

/// `ψ̃(η) = χ(η/2) - χ(4η)`, equal to 1 on `supp ψ`.
pub fn psi_tilde<T: Real>(eta: T) -> T {
    chi(eta / T::lit(2.0)) - chi(T::lit(4.0) * eta)
}

/// Dyadic decomposition of the wavenumbers of one grid.
///
/// `l_max` is the largest `l` with `2^{l-1} < max|ξ_k|`; every block above it
/// vanishes identically on the grid, and `S_0 + Σ_{l=1}^{l_max} Δ_l` is the
/// identity.
#[derive(Debug, Clone)]
pub struct DyadicDecomposition<T: Real> {
    grid: TorusGrid<T>,
    l_max: usize,
    low: Vec<T>,
    blocks: Vec<Vec<T>>,
}

impl<T: Real> DyadicDecomposition<T> {
    pub fn new(grid: &TorusGrid<T>) -> Self {
        let xi_max = grid.max_wavenumber();
        let mut l_max = 0usize;
        while T::lit(2.0).powi(l_max as i32) < xi_max {
            l_max += 1;
        }
        let xis = grid.wavenumbers();
        let low = xis.iter().map(|&x| chi(x)).collect();
        let blocks = (0..=l_max)
            .map(|l| {
                let scale = T::lit(2.0).powi(-(l as i32));
                xis.iter().map(|&x| psi(x * scale)).collect()
            })
            .collect();
        Self { grid: grid.clone(), l_max, low, blocks }
    }

    #[inline]
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    fn check(&self, f: &SpectralField<T>) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_block(&self, l: usize) -> Result<()> {
        if l > self.l_max {
            return Err(Error::BlockRange { l, l_max: self.l_max });
        }
        Ok(())
    }

    /// Samples of `ψ_l` at the grid wavenumbers.
    pub fn block_symbol(&self, l: usize) -> Result<&[T]> {
        self.check_block(l)?;
        Ok(&self.blocks[l])
    }

    /// Samples of `χ` at the grid wavenumbers.
    pub fn low_symbol(&self) -> &[T] {
        &self.low
    }

    /// `Δ_l f`.
    pub fn lp_block(&self, f: &SpectralField<T>, l: usize) -> Result<SpectralField<T>> {
        self.check(f)?;
        self.check_block(l)?;
        Ok(scale_by(f, &self.blocks[l]))
    }

    /// `S_0 f`.
    pub fn s0(&self, f: &SpectralField<T>) -> Result<SpectralField<T>> {
        self.check(f)?;
        Ok(scale_by(f, &self.low))
    }

    /// `Δ'_l f`, symbol `i 2^{-l} ψ'(2^{-l} ξ)`, so that `xΔ_l f = Δ_l(xf) + Δ'_l f`.
    pub fn commutator_block(&self, f: &SpectralField<T>, l: usize) -> Result<SpectralField<T>> {
        self.check(f)?;
        self.check_block(l)?;
        let scale = T::lit(2.0).powi(-(l as i32));
        Ok(f.map_symbol(|xi| Complex::new(T::zero(), scale * psi_prime(scale * xi))))
    }

    /// `S'_0 f`, symbol `i χ'(ξ)`, so that `xS_0 f = S_0(xf) + S'_0 f`.
    pub fn s0_commutator(&self, f: &SpectralField<T>) -> Result<SpectralField<T>> {
        self.check(f)?;
        Ok(f.map_symbol(|xi| Complex::new(T::zero(), chi_prime(xi))))
    }

    /// `Δ̃_l f` with symbol `ψ̃(2^{-l}ξ)`.
    pub fn tilde_block(&self, f: &SpectralField<T>, l: usize) -> Result<SpectralField<T>> {
        self.check(f)?;
        let scale = T::lit(2.0).powi(-(l as i32));
        Ok(f.map_real_symbol(|xi| psi_tilde(scale * xi)))
    }

    /// `S_0 f + Σ_{l=1}^{l_max} Δ_l f`.
    pub fn reconstruct(&self, f: &SpectralField<T>) -> Result<SpectralField<T>> {
        self.check(f)?;
        let total: Vec<T> =
            (0..self.low.len()).map(|i| self.low[i] + (1..=self.l_max).map(|l| self.blocks[l][i]).sum::<T>()).collect();
        Ok(scale_by(f, &total))
    }
}

fn scale_by<T: Real>(f: &SpectralField<T>, symbol: &[T]) -> SpectralField<T> {
    let mut out = f.clone();
    for (c, &s) in out.coeffs_mut().iter_mut().zip(symbol) {
        *c = c.scale(s);
    }
    out
}

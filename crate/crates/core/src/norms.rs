//! Sobolev, Besov and space-time seminorms built on the dyadic blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicDecomposition;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::SpectralField;
use crate::trajectory::{Exponent, MixedNorm, MixedNormAccumulator, Trajectory};

/// Weighted results are only trusted below this boundary-mass fraction.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

/// `ℓ^q` aggregation of the dyadic sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Summation {
    L1,
    L2,
}

impl Summation {
    pub fn from_q(q: u32) -> Result<Self> {
        match q {
            1 => Ok(Self::L1),
            2 => Ok(Self::L2),
            other => Err(Error::param("q", format!("Besov index must be 1 or 2, got {other}"))),
        }
    }

    fn aggregate<T: Real>(self, terms: &[T]) -> T {
        match self {
            Self::L1 => terms.iter().copied().sum(),
            Self::L2 => terms.iter().map(|t| *t * *t).sum::<T>().sqrt(),
        }
    }
}

/// `‖(1+ξ²)^{s/2} f̂‖` with the continuum normalisation.
pub fn sobolev_norm<T: Real>(f: &SpectralField<T>, s: T) -> T {
    if s == T::zero() {
        return f.l2_norm();
    }
    let g = f.grid();
    let sum: T = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let xi = g.wavenumber(i);
            (T::one() + xi * xi).powf(s) * c.norm_sqr()
        })
        .sum();
    (sum / (T::lit(2.0) * g.half_period())).sqrt()
}

/// `Σ_{l=0}^k ‖x ∂_x^l f‖`.
pub fn weighted_sobolev_norm<T: Real>(f: &SpectralField<T>, k: u32) -> T {
    (0..=k).map(|l| f.derivative(l).multiply_by_x().l2_norm()).sum()
}

/// Dyadic pieces of a (weighted) Besov norm: `‖S_0 f‖` and `2^{ls}‖Δ_l f‖` for `l = 0..=l_max`.
pub fn besov_terms<T: Real>(
    dec: &DyadicDecomposition<T>,
    f: &SpectralField<T>,
    s: T,
    weighted: bool,
) -> Result<(T, Vec<T>)> {
    let norm = |g: SpectralField<T>| {
        if weighted {
            g.multiply_by_x().l2_norm()
        } else {
            g.l2_norm()
        }
    };
    let low = norm(dec.s0(f)?);
    let two = T::lit(2.0);
    let terms = (0..=dec.l_max())
        .into_par_iter()
        .map(|l| Ok(two.powf(s * T::count(l)) * norm(dec.lp_block(f, l)?)))
        .collect::<Result<Vec<T>>>()?;
    Ok((low, terms))
}

/// `‖S_0 f‖ + ‖{2^{ls}‖Δ_l f‖}_{l≥0}‖_{ℓ^q}`.
pub fn besov_norm<T: Real>(dec: &DyadicDecomposition<T>, f: &SpectralField<T>, s: T, q: Summation) -> Result<T> {
    let (low, terms) = besov_terms(dec, f, s, false)?;
    Ok(low + q.aggregate(&terms))
}

/// `‖xS_0 f‖ + ‖{2^{ls}‖xΔ_l f‖}_{l≥0}‖_{ℓ^q}`.
pub fn weighted_besov_norm<T: Real>(
    dec: &DyadicDecomposition<T>,
    f: &SpectralField<T>,
    s: T,
    q: Summation,
) -> Result<T> {
    let (low, terms) = besov_terms(dec, f, s, true)?;
    Ok(low + q.aggregate(&terms))
}

/// Geometric factor `(Σ_{l≥1} 4^{(2j+1/4-s)l})^{1/2}`, defined for `s > 2j + 1/4`.
pub fn embedding_gap<T: Real>(j: u32, s: T) -> Result<T> {
    let r = T::lit(4.0).powf(T::count(2 * j as usize) + T::lit(0.25) - s);
    if !(r < T::one()) {
        return Err(Error::param("s", format!("embedding needs s > 2j + 1/4 = {}", 2.0 * j as f64 + 0.25)));
    }
    Ok((r / (T::one() - r)).sqrt())
}

/// One named norm with its dyadic breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub name: String,
    pub value: f64,
    pub l_max: usize,
    pub boundary_mass: f64,
    /// `‖S_0 f‖` (or `‖xS_0 f‖`); absent for non-dyadic norms.
    pub low: Option<f64>,
    /// `2^{ls}‖Δ_l f‖` for `l = 0..=l_max`; empty for non-dyadic norms.
    pub blocks: Vec<f64>,
}

impl NormReport {
    pub fn weighted_valid(&self) -> bool {
        self.boundary_mass < BOUNDARY_MASS_LIMIT
    }

    /// CSV header for a table of reports sharing `l_max`.
    pub fn csv_header(l_max: usize) -> String {
        let mut h = String::from("name,value,l_max,boundary_mass,low");
        for l in 0..=l_max {
            h.push_str(&format!(",b{l}"));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{:.12e},{},{:.12e},", self.name, self.value, self.l_max, self.boundary_mass);
        if let Some(low) = self.low {
            row.push_str(&format!("{low:.12e}"));
        }
        for l in 0..=self.l_max {
            row.push(',');
            if let Some(b) = self.blocks.get(l) {
                row.push_str(&format!("{b:.12e}"));
            }
        }
        row
    }

    pub fn besov<T: Real>(
        dec: &DyadicDecomposition<T>,
        f: &SpectralField<T>,
        s: T,
        q: Summation,
        weighted: bool,
    ) -> Result<Self> {
        let (low, terms) = besov_terms(dec, f, s, weighted)?;
        let prefix = if weighted { "weighted_besov" } else { "besov" };
        let qn = if q == Summation::L1 { 1 } else { 2 };
        Ok(Self {
            name: format!("{prefix}_s{s}_q{qn}"),
            value: (low + q.aggregate(&terms)).as_f64(),
            l_max: dec.l_max(),
            boundary_mass: f.boundary_mass_fraction().as_f64(),
            low: Some(low.as_f64()),
            blocks: terms.iter().map(|t| t.as_f64()).collect(),
        })
    }

    pub fn sobolev<T: Real>(dec: &DyadicDecomposition<T>, f: &SpectralField<T>, s: T) -> Self {
        Self::plain(format!("sobolev_s{s}"), sobolev_norm(f, s), dec, f)
    }

    pub fn weighted_sobolev<T: Real>(dec: &DyadicDecomposition<T>, f: &SpectralField<T>, k: u32) -> Self {
        Self::plain(format!("weighted_sobolev_k{k}"), weighted_sobolev_norm(f, k), dec, f)
    }

    fn plain<T: Real>(name: String, value: T, dec: &DyadicDecomposition<T>, f: &SpectralField<T>) -> Self {
        Self {
            name,
            value: value.as_f64(),
            l_max: dec.l_max(),
            boundary_mass: f.boundary_mass_fraction().as_f64(),
            low: None,
            blocks: Vec::new(),
        }
    }
}

/// Space-time norms of one dyadic piece of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockNorms<T> {
    /// `‖·‖_{L^∞_T L^2_x}`
    pub sup_t_l2_x: T,
    /// `‖x·‖_{L^∞_T L^2_x}`
    pub weighted_sup_t_l2_x: T,
    /// `‖·‖_{L^∞_x L^2_T}`
    pub sup_x_l2_t: T,
    /// `‖x·‖_{L^∞_x L^2_T}`
    pub weighted_sup_x_l2_t: T,
    /// `‖·‖_{L^1_x L^∞_T}`
    pub l1_x_sup_t: T,
}

/// Space-time norms of `S_0 u` and `Δ_l u`, `l = 1..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTable<T> {
    pub low: BlockNorms<T>,
    /// Entry `i` is block `l = i + 1`.
    pub blocks: Vec<BlockNorms<T>>,
    pub boundary_mass: T,
}

struct PieceAccumulator<T: Real> {
    plain: MixedNormAccumulator<T>,
    weighted: MixedNormAccumulator<T>,
}

/// Streaming construction of a [`BlockTable`]; push fields in time order.
pub struct BlockTableAccumulator<T: Real> {
    dec: DyadicDecomposition<T>,
    pieces: Vec<PieceAccumulator<T>>,
    coords: Vec<T>,
    boundary_mass: T,
}

impl<T: Real> BlockTableAccumulator<T> {
    pub fn new(dec: &DyadicDecomposition<T>, dt: T) -> Self {
        let grid = dec.grid();
        let pieces = (0..=dec.l_max())
            .map(|_| PieceAccumulator {
                plain: MixedNormAccumulator::new(grid, dt),
                weighted: MixedNormAccumulator::new(grid, dt),
            })
            .collect();
        Self { dec: dec.clone(), pieces, coords: grid.coordinates(), boundary_mass: T::zero() }
    }

    pub fn push(&mut self, u: &SpectralField<T>) -> Result<()> {
        if u.grid() != self.dec.grid() {
            return Err(Error::GridMismatch);
        }
        self.boundary_mass = self.boundary_mass.max(u.boundary_mass_fraction());
        let dec = &self.dec;
        let coords = &self.coords;
        self.pieces.par_iter_mut().enumerate().try_for_each(|(i, acc)| -> Result<()> {
            // piece 0 is S_0, piece i ≥ 1 is Δ_i
            let piece = if i == 0 { dec.s0(u)? } else { dec.lp_block(u, i)? };
            let samples = piece.to_physical();
            acc.plain.push(&samples);
            acc.weighted.push_weighted(&samples, |m| coords[m]);
            Ok(())
        })
    }

    pub fn finish(&self) -> Result<BlockTable<T>> {
        let st = |p, q| MixedNorm::SpaceTime { p, q };
        let ts = |q, p| MixedNorm::TimeSpace { q, p };
        let norms = self
            .pieces
            .iter()
            .map(|acc| {
                Ok(BlockNorms {
                    sup_t_l2_x: acc.plain.finish(ts(Exponent::Infinity, Exponent::Two))?,
                    weighted_sup_t_l2_x: acc.weighted.finish(ts(Exponent::Infinity, Exponent::Two))?,
                    sup_x_l2_t: acc.plain.finish(st(Exponent::Infinity, Exponent::Two))?,
                    weighted_sup_x_l2_t: acc.weighted.finish(st(Exponent::Infinity, Exponent::Two))?,
                    l1_x_sup_t: acc.plain.finish(st(Exponent::One, Exponent::Infinity))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockTable { low: norms[0], blocks: norms[1..].to_vec(), boundary_mass: self.boundary_mass })
    }
}

/// Block table of a stored trajectory.
pub fn block_table<T: Real>(dec: &DyadicDecomposition<T>, traj: &Trajectory<T>) -> Result<BlockTable<T>> {
    let mut acc = BlockTableAccumulator::new(dec, traj.times().dt());
    for u in traj.fields() {
        acc.push(u)?;
    }
    acc.finish()
}

/// The five seminorms whose sum is the `X_T` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XtSeminorms<T> {
    pub n1: T,
    pub n2: T,
    pub p1: T,
    pub p2: T,
    pub m: T,
}

impl<T: Real> XtSeminorms<T> {
    pub fn total(&self) -> T {
        self.n1 + self.n2 + self.p1 + self.p2 + self.m
    }
}

/// The four seminorms whose sum is the `X_{T,s}` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XtsSeminorms<T> {
    pub n1: T,
    pub n2: T,
    pub p1: T,
    pub p2: T,
}

impl<T: Real> XtsSeminorms<T> {
    pub fn total(&self) -> T {
        self.n1 + self.n2 + self.p1 + self.p2
    }
}

fn dyadic_l1<T: Real>(table: &BlockTable<T>, exponent: T, pick: impl Fn(&BlockNorms<T>) -> T) -> T {
    let two = T::lit(2.0);
    pick(&table.low)
        + table.blocks.iter().enumerate().map(|(i, b)| two.powf(exponent * T::count(i + 1)) * pick(b)).sum::<T>()
}

fn dyadic_l2<T: Real>(table: &BlockTable<T>, s: T, pick: impl Fn(&BlockNorms<T>) -> T) -> T {
    let four = T::lit(4.0);
    pick(&table.low)
        + table
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| four.powf(s * T::count(i + 1)) * pick(b).powi(2))
            .sum::<T>()
            .sqrt()
}

/// `N_1, N_2, P_1, P_2, M` for dispersion order `2j+1`.
pub fn xt_seminorms<T: Real>(table: &BlockTable<T>, j: u32) -> XtSeminorms<T> {
    let jj = T::count(j as usize);
    let q = T::lit(0.25);
    XtSeminorms {
        n1: dyadic_l1(table, T::lit(2.0) * jj + q, |b| b.sup_t_l2_x),
        n2: dyadic_l1(table, q, |b| b.weighted_sup_t_l2_x),
        p1: dyadic_l1(table, T::lit(3.0) * jj + q, |b| b.sup_x_l2_t),
        p2: dyadic_l1(table, jj + q, |b| b.weighted_sup_x_l2_t),
        m: dyadic_l1(table, T::zero(), |b| b.l1_x_sup_t),
    }
}

/// `N_{1,s}, N_{2,s}, P_{1,s}, P_{2,s}`.
pub fn xts_seminorms<T: Real>(table: &BlockTable<T>, j: u32, s: T) -> XtsSeminorms<T> {
    let jj = T::count(j as usize);
    XtsSeminorms {
        n1: dyadic_l2(table, s, |b| b.sup_t_l2_x),
        n2: dyadic_l2(table, s - T::lit(2.0) * jj, |b| b.weighted_sup_t_l2_x),
        p1: dyadic_l2(table, s + jj, |b| b.sup_x_l2_t),
        p2: dyadic_l2(table, s - jj, |b| b.weighted_sup_x_l2_t),
    }
}

/// Size of the data in the contraction space: `B^{2j+1/4,1} + B^{1/4,1}(x²dx)`.
pub fn beta<T: Real>(dec: &DyadicDecomposition<T>, u0: &SpectralField<T>, j: u32) -> Result<T> {
    let s = T::count(2 * j as usize) + T::lit(0.25);
    Ok(besov_norm(dec, u0, s, Summation::L1)? + weighted_besov_norm(dec, u0, T::lit(0.25), Summation::L1)?)
}

/// `λ_s = [B^{2j+1/4,1} + B^{1/4,1}(x²dx)] / [H^s + B^{s-2j,2}(x²dx)]`.
pub fn lambda_s<T: Real>(dec: &DyadicDecomposition<T>, u0: &SpectralField<T>, s: T, j: u32) -> Result<T> {
    let denom = sobolev_norm(u0, s) + weighted_besov_norm(dec, u0, s - T::count(2 * j as usize), Summation::L2)?;
    if denom == T::zero() {
        return Err(Error::ZeroData("λ_s has a zero denominator".into()));
    }
    Ok(beta(dec, u0, j)? / denom)
}

/// `‖u‖_{X_T} + λ·‖u‖_{X_{T,s}}`.
pub fn y_norm<T: Real>(table: &BlockTable<T>, j: u32, s: T, lambda: T) -> T {
    xt_seminorms(table, j).total() + lambda * xts_seminorms(table, j, s).total()
}

//! Time-sampled fields and mixed space-time Lebesgue norms.

use num_complex::Complex;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{SpectralField, TorusGrid};

/// Uniform time nodes `t_n = start + n·dt`, `n = 0..=steps`, always containing `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T: Real> {
    start: T,
    dt: T,
    steps: usize,
    origin: usize,
}

impl<T: Real> TimeGrid<T> {
    /// Nodes on `[0, horizon]` (or `[horizon, 0]` for negative horizons).
    pub fn one_sided(horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::param("steps", "at least one time step is required"));
        }
        if !horizon.is_finite() || horizon == T::zero() {
            return Err(Error::param("T", format!("must be finite and nonzero, got {horizon}")));
        }
        let dt = horizon / T::count(steps);
        if horizon > T::zero() {
            Ok(Self { start: T::zero(), dt, steps, origin: 0 })
        } else {
            Ok(Self { start: horizon, dt: -dt, steps, origin: steps })
        }
    }

    /// Nodes on `[-horizon, horizon]` with `steps_per_side` steps on each side of 0.
    pub fn symmetric(horizon: T, steps_per_side: usize) -> Result<Self> {
        if steps_per_side == 0 {
            return Err(Error::param("steps", "at least one time step is required"));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::param("T", format!("must be positive and finite, got {horizon}")));
        }
        Ok(Self {
            start: -horizon,
            dt: horizon / T::count(steps_per_side),
            steps: 2 * steps_per_side,
            origin: steps_per_side,
        })
    }

    /// One-sided grid on `[0, horizon]` with step `dt`, which must divide `horizon`.
    pub fn with_step(horizon: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let ratio = Float::abs(horizon) / dt;
        let steps = ratio.round();
        if Float::abs(ratio - steps) > T::lit(1e-9) * ratio.max(T::one()) || steps < T::one() {
            return Err(Error::param("dt", format!("time step {dt} does not divide T = {horizon}")));
        }
        Self::one_sided(horizon, steps.to_usize().unwrap())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }

    #[inline]
    pub fn time(&self, n: usize) -> T {
        if n == self.origin {
            T::zero()
        } else {
            self.start + T::count(n) * self.dt
        }
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    /// Index of the node `t = 0`.
    #[inline]
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Total length of the time window.
    pub fn span(&self) -> T {
        T::count(self.steps) * self.dt
    }

    /// Same window with the step count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            start: self.start,
            dt: self.dt / T::count(factor),
            steps: self.steps * factor,
            origin: self.origin * factor,
        }
    }
}

/// Fields sampled at the nodes of a [`TimeGrid`], all on one spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    times: TimeGrid<T>,
    fields: Vec<SpectralField<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(times: TimeGrid<T>, fields: Vec<SpectralField<T>>) -> Result<Self> {
        if fields.len() != times.len() {
            return Err(Error::Length { expected: times.len(), got: fields.len() });
        }
        let grid = fields[0].grid().clone();
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { times, fields })
    }

    pub fn zeros(grid: &TorusGrid<T>, times: TimeGrid<T>) -> Self {
        Self { times, fields: vec![SpectralField::zeros(grid); times.len()] }
    }

    /// Constant-in-time trajectory.
    pub fn constant(f: &SpectralField<T>, times: TimeGrid<T>) -> Self {
        Self { times, fields: vec![f.clone(); times.len()] }
    }

    pub fn from_fn(times: TimeGrid<T>, mut f: impl FnMut(T) -> SpectralField<T>) -> Result<Self> {
        let fields = times.times().into_iter().map(&mut f).collect();
        Self::new(times, fields)
    }

    #[inline]
    pub fn times(&self) -> &TimeGrid<T> {
        &self.times
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid<T> {
        self.fields[0].grid()
    }

    #[inline]
    pub fn fields(&self) -> &[SpectralField<T>] {
        &self.fields
    }

    pub fn field(&self, n: usize) -> Result<&SpectralField<T>> {
        self.fields.get(n).ok_or(Error::TimeIndex { index: n, len: self.fields.len() })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn last(&self) -> &SpectralField<T> {
        self.fields.last().expect("trajectories are nonempty")
    }

    pub fn map(&self, f: impl Fn(&SpectralField<T>) -> SpectralField<T> + Send + Sync) -> Self {
        use rayon::prelude::*;
        Self { times: self.times, fields: self.fields.par_iter().map(f).collect() }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        Ok(Self { times: self.times, fields: self.fields.iter().zip(&other.fields).map(|(a, b)| a.sub(b)).collect() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        Ok(Self { times: self.times, fields: self.fields.iter().zip(&other.fields).map(|(a, b)| a.add(b)).collect() })
    }

    pub fn scale_real(&self, c: T) -> Self {
        Self { times: self.times, fields: self.fields.iter().map(|f| f.scale_real(c)).collect() }
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.times != other.times {
            return Err(Error::param("trajectory", "time grids differ"));
        }
        if self.grid() != other.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `L^∞_T L^2_x` distance between two trajectories on the same grids.
    pub fn sup_l2_distance(&self, other: &Self) -> Result<T> {
        self.compatible(other)?;
        Ok(self.fields.iter().zip(&other.fields).map(|(a, b)| a.sub(b).l2_norm()).fold(T::zero(), T::max))
    }

    /// Largest boundary-mass fraction over the time nodes.
    pub fn boundary_mass_fraction(&self) -> T {
        self.fields.iter().map(|f| f.boundary_mass_fraction()).fold(T::zero(), T::max)
    }
}

/// Lebesgue exponent used in mixed norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Four,
    Infinity,
}

impl Exponent {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            "4" => Ok(Self::Four),
            "inf" | "infinity" | "∞" => Ok(Self::Infinity),
            other => Err(Error::param("exponent", format!("unsupported exponent {other}"))),
        }
    }
}

/// Which norm is applied first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixedNorm {
    /// `L^p_x L^q_T`: time norm at each point, then space norm.
    SpaceTime { p: Exponent, q: Exponent },
    /// `L^q_T L^p_x`: space norm at each time, then time norm.
    TimeSpace { q: Exponent, p: Exponent },
}

/// Streaming evaluation of every supported mixed norm of one space-time function.
///
/// Feed physical samples in time order with [`push`](Self::push). Time norms
/// use the trapezoid rule (`q = 2`) or the sample maximum (`q = ∞`).
#[derive(Debug, Clone)]
pub struct MixedNormAccumulator<T: Real> {
    dx: T,
    dt: T,
    nodes: usize,
    sum_sq: Vec<T>,
    first_sq: Vec<T>,
    last_sq: Vec<T>,
    max_abs: Vec<T>,
    // per-time spatial norms, p = 1, 2, 4, ∞
    per_time: Vec<[T; 4]>,
}

impl<T: Real> MixedNormAccumulator<T> {
    pub fn new(grid: &TorusGrid<T>, dt: T) -> Self {
        let m = grid.num_points();
        Self {
            dx: grid.spacing(),
            dt: Float::abs(dt),
            nodes: 0,
            sum_sq: vec![T::zero(); m],
            first_sq: Vec::new(),
            last_sq: vec![T::zero(); m],
            max_abs: vec![T::zero(); m],
            per_time: Vec::new(),
        }
    }

    pub fn push(&mut self, samples: &[Complex<T>]) {
        self.push_weighted(samples, |_| T::one());
    }

    /// Pushes `w(m)·samples[m]` without materializing the product.
    pub fn push_weighted(&mut self, samples: &[Complex<T>], weight: impl Fn(usize) -> T) {
        debug_assert_eq!(samples.len(), self.sum_sq.len());
        let (mut n1, mut n2, mut n4, mut ninf) = (T::zero(), T::zero(), T::zero(), T::zero());
        let record_first = self.nodes == 0;
        if record_first {
            self.first_sq = vec![T::zero(); samples.len()];
        }
        for (m, v) in samples.iter().enumerate() {
            let sq = v.norm_sqr() * weight(m).powi(2);
            let a = sq.sqrt();
            n1 += a;
            n2 += sq;
            n4 += sq * sq;
            ninf = ninf.max(a);
            self.sum_sq[m] += sq;
            self.last_sq[m] = sq;
            if record_first {
                self.first_sq[m] = sq;
            }
            if a > self.max_abs[m] {
                self.max_abs[m] = a;
            }
        }
        let dx = self.dx;
        self.per_time.push([n1 * dx, (n2 * dx).sqrt(), (n4 * dx).sqrt().sqrt(), ninf]);
        self.nodes += 1;
    }

    fn time_l2_sq(&self, m: usize) -> T {
        if self.nodes < 2 {
            return T::zero();
        }
        let half = T::lit(0.5);
        (self.sum_sq[m] - half * (self.first_sq[m] + self.last_sq[m])) * self.dt
    }

    pub fn finish(&self, norm: MixedNorm) -> Result<T> {
        if self.nodes == 0 {
            return Err(Error::param("trajectory", "no time samples"));
        }
        Ok(match norm {
            MixedNorm::SpaceTime { p, q } => {
                let per_x: Vec<T> = (0..self.sum_sq.len())
                    .map(|m| match q {
                        Exponent::Two => self.time_l2_sq(m).max(T::zero()).sqrt(),
                        Exponent::Infinity => self.max_abs[m],
                        _ => T::nan(),
                    })
                    .collect();
                if !matches!(q, Exponent::Two | Exponent::Infinity) {
                    return Err(Error::param("q", "time exponent must be 2 or ∞"));
                }
                spatial_norm(&per_x, p, self.dx)
            }
            MixedNorm::TimeSpace { q, p } => {
                let idx = match p {
                    Exponent::One => 0,
                    Exponent::Two => 1,
                    Exponent::Four => 2,
                    Exponent::Infinity => 3,
                };
                let vals: Vec<T> = self.per_time.iter().map(|v| v[idx]).collect();
                match q {
                    Exponent::Infinity => vals.iter().copied().fold(T::zero(), T::max),
                    Exponent::Two => {
                        if vals.len() < 2 {
                            T::zero()
                        } else {
                            let half = T::lit(0.5);
                            let mut s: T = vals.iter().map(|v| *v * *v).sum();
                            s -= half * (vals[0] * vals[0] + vals[vals.len() - 1] * vals[vals.len() - 1]);
                            (s * self.dt).max(T::zero()).sqrt()
                        }
                    }
                    _ => return Err(Error::param("q", "time exponent must be 2 or ∞")),
                }
            }
        })
    }
}

fn spatial_norm<T: Real>(values: &[T], p: Exponent, dx: T) -> T {
    match p {
        Exponent::One => values.iter().copied().sum::<T>() * dx,
        Exponent::Two => (values.iter().map(|v| *v * *v).sum::<T>() * dx).sqrt(),
        Exponent::Four => (values.iter().map(|v| v.powi(4)).sum::<T>() * dx).powf(T::lit(0.25)),
        Exponent::Infinity => values.iter().copied().fold(T::zero(), T::max),
    }
}

/// Mixed space-time norm of a stored trajectory.
pub fn mixed_norm<T: Real>(traj: &Trajectory<T>, norm: MixedNorm) -> Result<T> {
    let mut acc = MixedNormAccumulator::new(traj.grid(), traj.times().dt());
    for f in traj.fields() {
        acc.push(&f.to_physical());
    }
    acc.finish(norm)
}

//! Seeded families of test data for the estimate lab.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SpectralField, TorusGrid};

/// Relative amplitude below which a packet is treated as absent, in space
/// and in frequency (the neglected mass is then below `1e-16`).
const NEGLIGIBLE: f64 = 1e-8;
/// Stricter level used when sizing a grid.
const RESOLVED: f64 = 1e-14;

/// `a·e^{in(x−c)}·e^{−((x−c)/σ)²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub n: f64,
    pub sigma: f64,
    pub center: f64,
    pub amp_re: f64,
    pub amp_im: f64,
}

impl Packet {
    pub fn new(n: f64, sigma: f64) -> Self {
        Self { n, sigma, center: 0.0, amp_re: 1.0, amp_im: 0.0 }
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.amp_re, self.amp_im)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let y = x - self.center;
        let env = (-(y / self.sigma).powi(2)).exp();
        self.amplitude() * Complex64::from_polar(env, self.n * y)
    }

    /// Largest `|ξ|` carrying non-negligible spectrum.
    pub fn band(&self) -> f64 {
        self.n.abs() + 2.0 * (-NEGLIGIBLE.ln()).sqrt() / self.sigma
    }

    /// Largest `|ξ|` a grid must resolve.
    pub fn resolution_band(&self) -> f64 {
        self.n.abs() + 2.0 * (-RESOLVED.ln()).sqrt() / self.sigma
    }

    /// Largest `|x|` carrying non-negligible mass.
    pub fn extent(&self) -> f64 {
        self.center.abs() + (-NEGLIGIBLE.ln()).sqrt() * self.sigma
    }

    /// `x ↦ p(λx)`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self { n: self.n * lambda, sigma: self.sigma / lambda, center: self.center / lambda, ..*self }
    }
}

/// Finite sum of packets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub packets: Vec<Packet>,
}

impl Profile {
    pub fn single(p: Packet) -> Self {
        Self { packets: vec![p] }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.packets.iter().map(|p| p.eval(x)).sum()
    }

    pub fn band(&self) -> f64 {
        self.packets.iter().map(Packet::band).fold(0.0, f64::max)
    }

    pub fn resolution_band(&self) -> f64 {
        self.packets.iter().map(Packet::resolution_band).fold(0.0, f64::max)
    }

    pub fn extent(&self) -> f64 {
        self.packets.iter().map(Packet::extent).fold(0.0, f64::max)
    }

    pub fn min_width(&self) -> f64 {
        self.packets.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { packets: self.packets.iter().map(|p| p.scaled(lambda)).collect() }
    }

    /// Multiplies by `e^{iNx}`, shifting every carrier by `N`.
    pub fn modulated(&self, carrier: f64) -> Self {
        let packets = self
            .packets
            .iter()
            .map(|p| {
                // e^{iNx} = e^{iNc}·e^{iN(x−c)}
                let amp = p.amplitude() * Complex64::from_polar(1.0, carrier * p.center);
                Packet { n: p.n + carrier, amp_re: amp.re, amp_im: amp.im, ..*p }
            })
            .collect();
        Self { packets }
    }

    pub fn scaled_amplitude(&self, c: f64) -> Self {
        let packets =
            self.packets.iter().map(|p| Packet { amp_re: p.amp_re * c, amp_im: p.amp_im * c, ..*p }).collect();
        Self { packets }
    }

    pub fn field(&self, grid: &TorusGrid<f64>) -> Result<SpectralField<f64>> {
        SpectralField::from_fn(grid, |x| self.eval(x))
    }
}

/// Test datum: a localized profile or a single Fourier mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Member {
    Localized(Profile),
    PureMode { xi: f64 },
}

/// How members are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// Sums of `atoms` packets with random frequency in `[−band/2, band/2]`,
    /// width `24/band` (so the spectrum stays inside `[−band, band]`),
    /// centers in `[−spread, spread]` and complex Gaussian amplitudes.
    BandLimited {
        band: f64,
        #[serde(default = "default_atoms")]
        atoms: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    /// `e^{iNx}e^{−(x/σ)²}` with a random phase.
    WavePacket { n: f64, sigma: f64 },
    /// Packets concentrated in the dyadic annulus `|ξ| ≈ 2^l`, of width
    /// `24·2^{-l}` and center in `[−spread, spread]·2^{-l}`, so that the
    /// family is self-similar in `l`.
    DyadicBlock {
        l: u32,
        #[serde(default = "default_block_spread")]
        spread: f64,
    },
    /// `e^{i2^l x}`.
    PureMode { l: u32 },
    /// Real Gaussians of random width in `[1/2, 2]` and center in `[−spread, spread]`.
    Gaussian {
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

fn default_atoms() -> usize {
    6
}
fn default_spread() -> f64 {
    2.0
}
fn default_block_spread() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub generator: Generator,
    pub count: usize,
    pub seed: u64,
}

fn member_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn normal_amplitude(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (re, im)
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be positive"))
            }
        };
        match self {
            Self::BandLimited { band, atoms, spread } => {
                positive("band", *band)?;
                if *atoms == 0 {
                    return Err(Error::param("atoms", "must be at least 1"));
                }
                if *spread < 0.0 {
                    return Err(Error::param("spread", "must be non-negative"));
                }
            }
            Self::WavePacket { n, sigma } => {
                positive("sigma", *sigma)?;
                if !n.is_finite() {
                    return Err(Error::param("n", "must be finite"));
                }
            }
            Self::DyadicBlock { spread, .. } | Self::Gaussian { spread } => {
                if *spread < 0.0 {
                    return Err(Error::param("spread", "must be non-negative"));
                }
            }
            Self::PureMode { .. } => {}
        }
        Ok(())
    }

    /// The same generator moved to dyadic level `l`, where that makes sense.
    pub fn at_level(&self, l: u32) -> Self {
        match self {
            Self::DyadicBlock { spread, .. } => Self::DyadicBlock { l, spread: *spread },
            Self::PureMode { .. } => Self::PureMode { l },
            other => other.clone(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Member {
        match self {
            Self::BandLimited { band, atoms, spread } => {
                let sigma = 24.0 / band;
                let packets = (0..*atoms)
                    .map(|_| {
                        let n = rng.random_range(-0.5..=0.5) * band;
                        let center = rng.random_range(-1.0..=1.0) * spread;
                        let (amp_re, amp_im) = normal_amplitude(rng);
                        Packet { n, sigma, center, amp_re, amp_im }
                    })
                    .collect();
                Member::Localized(Profile { packets })
            }
            Self::WavePacket { n, sigma } => {
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let (s, c) = phase.sin_cos();
                Member::Localized(Profile::single(Packet { amp_re: c, amp_im: s, ..Packet::new(*n, *sigma) }))
            }
            Self::DyadicBlock { l, spread } => {
                let scale = 2f64.powi(*l as i32);
                let n = rng.random_range(1.25..=1.75) * scale;
                let sigma = 24.0 / scale;
                let center = rng.random_range(-1.0..=1.0) * spread / scale;
                let (amp_re, amp_im) = normal_amplitude(rng);
                Member::Localized(Profile::single(Packet { n, sigma, center, amp_re, amp_im }))
            }
            Self::PureMode { l } => Member::PureMode { xi: 2f64.powi(*l as i32) },
            Self::Gaussian { spread } => {
                let sigma = rng.random_range(0.5..=2.0);
                let center = rng.random_range(-1.0..=1.0) * spread;
                let amp: f64 = rng.sample(StandardNormal);
                Member::Localized(Profile::single(Packet { n: 0.0, sigma, center, amp_re: amp, amp_im: 0.0 }))
            }
        }
    }
}

impl Ensemble {
    pub fn new(generator: Generator, count: usize, seed: u64) -> Self {
        Self { generator, count, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("count", "ensemble needs at least one member"));
        }
        self.generator.validate()
    }

    pub fn at_level(&self, l: u32) -> Self {
        Self { generator: self.generator.at_level(l), ..self.clone() }
    }

    /// Members in index order; member `i` depends only on `(seed, i)`.
    pub fn members(&self) -> Result<Vec<Member>> {
        self.validate()?;
        Ok((0..self.count).map(|i| self.generator.draw(&mut member_rng(self.seed, i))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn members_are_reproducible() {
        let e = Ensemble::new(Generator::BandLimited { band: 16.0, atoms: 4, spread: 2.0 }, 5, 42);
        assert_eq!(e.members().unwrap(), e.members().unwrap());
        let other = Ensemble { seed: 43, ..e.clone() };
        assert_ne!(e.members().unwrap(), other.members().unwrap());
        let longer = Ensemble { count: 7, ..e.clone() };
        assert_eq!(longer.members().unwrap()[..5], e.members().unwrap()[..]);
    }

    #[test]
    fn band_limited_members_stay_in_band() {
        let e = Ensemble::new(Generator::BandLimited { band: 16.0, atoms: 4, spread: 2.0 }, 3, 1);
        for m in e.members().unwrap() {
            let Member::Localized(p) = m else { panic!() };
            assert!(p.resolution_band() <= 16.0);
        }
    }

    #[test]
    fn members_are_localized() {
        let grid = TorusGrid::new(40.0, 1024).unwrap();
        let e = Ensemble::new(Generator::DyadicBlock { l: 3, spread: 2.0 }, 4, 9);
        for m in e.members().unwrap() {
            let Member::Localized(p) = m else { panic!() };
            assert!(p.extent() < 36.0);
            assert!(p.field(&grid).unwrap().boundary_mass_fraction() < 1e-6);
        }
    }

    #[test]
    fn scaling_a_packet() {
        let p = Packet { n: 3.0, sigma: 2.0, center: 1.0, amp_re: 1.0, amp_im: 0.5 };
        let q = p.scaled(2.0);
        for x in [-0.7, 0.1, 0.4] {
            assert_relative_eq!((q.eval(x) - p.eval(2.0 * x)).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn packet_band_edge() {
        let grid = TorusGrid::new(30.0, 2048).unwrap();
        let p = Packet::new(5.0, 1.0);
        let f = Profile::single(p).field(&grid).unwrap();
        let peak = f.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (i, c) in f.coeffs().iter().enumerate() {
            if grid.wavenumber(i).abs() > p.resolution_band() {
                assert!(c.norm() < 1e-13 * peak);
            }
        }
    }
}

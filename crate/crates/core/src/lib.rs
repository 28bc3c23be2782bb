//! Numerical laboratory for dispersive equations `∂_t u + ∂_x^{2j+1} u = N(u)`
//! and their nonlocal relatives on a large periodic box.
//!
//! The spectral machinery (grids, fields, Littlewood-Paley blocks, mixed
//! norms, the Picard solver) is generic over [`Real`]; the `*64` and `*32`
//! aliases below fix the scalar. The ill-posedness quadratures and the
//! estimate lab run in `f64`.

pub mod dyadic;
pub mod ensemble;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod fit;
pub mod illposed;
pub mod norms;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod trajectory;

pub use dyadic::DyadicDecomposition;
pub use ensemble::{Ensemble, Generator, Member, Packet, Profile};
pub use error::{Error, Result};
pub use estimates::{EstimateReport, EstimateRow, LabConfig, Resolution, Scan};
pub use evolution::{Coefficient, EquationSpec, Propagator};
pub use fit::LineFit;
pub use illposed::{FrechetReport, GrowthFitReport, WitnessConfig, WitnessTarget};
pub use norms::{BlockTable, NormReport, Summation};
pub use scalar::Real;
pub use solver::{SolveConfig, SolveReport};
pub use spectral::{Multiplier, SpectralField, TorusGrid};
pub use trajectory::{Exponent, MixedNorm, TimeGrid, Trajectory};

pub type TorusGrid64 = TorusGrid<f64>;
pub type TorusGrid32 = TorusGrid<f32>;
pub type SpectralField64 = SpectralField<f64>;
pub type SpectralField32 = SpectralField<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type TimeGrid32 = TimeGrid<f32>;
pub type DyadicDecomposition64 = DyadicDecomposition<f64>;
pub type DyadicDecomposition32 = DyadicDecomposition<f32>;
pub type SolveReport64 = SolveReport<f64>;
pub type SolveReport32 = SolveReport<f32>;

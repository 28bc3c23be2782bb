use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("length mismatch: grid has {expected} points, got {got}")]
    Length { expected: usize, got: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("symbol `{symbol}` is not finite at wavenumber {xi}")]
    NonFiniteSymbol { symbol: String, xi: f64 },

    #[error("non-finite value in field data at index {index}")]
    NonFiniteData { index: usize },

    #[error("block index {l} exceeds l_max = {l_max}")]
    BlockRange { l: usize, l_max: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("time index {index} out of range for a trajectory with {len} nodes")]
    TimeIndex { index: usize, len: usize },

    #[error("undefined for zero data: {0}")]
    ZeroData(String),

    #[error("anti-wraparound guard violated: {0}")]
    Guard(String),

    #[error("non-finite solution values at t = {t}")]
    BlowUp { t: f64 },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::Parameter { name: name.to_string(), reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

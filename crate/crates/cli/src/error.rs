use std::path::PathBuf;

use dispersion_core::Error as CoreError;
use thiserror::Error;

/// Exit status for a run whose checks all hold.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a completed run with a failing check, or a run that broke down.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for configuration and precondition errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    /// TOML syntax or schema error; the message carries line, column and key.
    #[error("config `{path}`: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    /// A module precondition rejected the configured values.
    #[error("config key `{key}`: {source}")]
    Precondition { key: String, source: CoreError },

    #[error("output directory `{path}` (key `output.dir`): {source}")]
    Output { path: PathBuf, source: std::io::Error },

    #[error("experiment `{experiment}` broke down: {source}")]
    Breakdown { experiment: String, source: CoreError },
}

impl CliError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid { key: key.to_string(), reason: reason.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Breakdown { .. } => EXIT_FAIL,
            _ => EXIT_CONFIG,
        }
    }
}

/// Attaches a config key to a core error. Blow-ups are numerical outcomes,
/// not configuration mistakes, so they keep their own class.
pub(crate) fn at_key(key: &str, experiment: &str) -> impl Fn(CoreError) -> CliError {
    let key = key.to_string();
    let experiment = experiment.to_string();
    move |source| match source {
        CoreError::BlowUp { .. } => CliError::Breakdown { experiment: experiment.clone(), source },
        source => CliError::Precondition { key: key.clone(), source },
    }
}

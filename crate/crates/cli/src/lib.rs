//! Config-driven experiment runner behind the `displab` binary.

pub mod config;
pub mod error;
pub mod experiments;

pub use config::{Estimate, Experiment, Job, RunConfig};
pub use error::{CliError, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
pub use experiments::{execute, list_experiments, registry, Outcome};

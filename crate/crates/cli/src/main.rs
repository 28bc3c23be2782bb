use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispersion_cli::{execute, list_experiments, CliError, RunConfig, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "displab", version, about = "Numerical experiments for higher-order dispersive equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the top-level `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write `summary.json`.
        #[arg(long)]
        json: bool,
    },
    /// Print the experiment table.
    ListExperiments,
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, json: bool) -> Result<i32, CliError> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    let outcome = execute(&cfg, &dir, json || cfg.output.json)?;
    println!("{}: {}", outcome.experiment, if outcome.pass { "PASS" } else { "FAIL" });
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
    Ok(if outcome.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListExperiments => {
            print!("{}", list_experiments());
            EXIT_PASS
        }
        Command::Run { config, out, seed, json } => run(config, out, seed, json).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            e.exit_code()
        }),
    };
    ExitCode::from(code as u8)
}

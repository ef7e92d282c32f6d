mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Format;

#[derive(Debug, Parser)]
#[command(name = "neural-pulse", version, about = "Traveling fronts and fast pulses of a neural field")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Which artifacts to write; overrides `output.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads for `sweep`; overrides `workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Front speed, Evans samples and front profile.
    Front,
    /// Fast pulse for a single epsilon.
    Pulse,
    /// Base-point Jacobian and first-order predictions.
    Asymptotics,
    /// Solve and certify a pulse.
    Verify,
    /// Direct simulation of the field equations.
    Simulate,
    /// Solve and verify over a list of epsilons.
    Sweep,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] neural_pulse::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_input_error() => 1,
            CliError::Core(_) | CliError::Io(_) => 2,
        }
    }
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NEURAL_PULSE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors, not numerical failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = commands::load(&cli).and_then(|ctx| commands::run(cli.command, &ctx));
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

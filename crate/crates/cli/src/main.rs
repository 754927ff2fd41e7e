//! `nico`: network inference from co-occurrence observations.
//!
//! Subcommands cover the full experiment pipeline: synthetic data
//! generation, EM/MCEM inference, graph reconstruction, the frequency
//! method baseline, evaluation, sample-size bounds, and scripted presets.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Every randomized
//! command takes `--seed` and is bit-reproducible. `NICO_THREADS` caps the
//! worker pool. Each subcommand accepts `--config FILE` with a JSON object
//! whose keys mirror the long flag names; explicit flags win.

mod commands;
mod presets;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "nico", version, about = "Network inference from co-occurrences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic topology with routed, shuffled observations
    Simulate(commands::SimulateArgs),
    /// Fit a Markov model to observations with EM / Monte Carlo EM
    Infer(commands::InferArgs),
    /// Decode most-likely orders under a model and emit a feasible graph
    Reconstruct(commands::ReconstructArgs),
    /// Frequency-method baseline reconstructions
    Fm(commands::FmArgs),
    /// Edge symmetric difference between an estimate and a reference
    Eval(commands::EvalArgs),
    /// Summarize a directory of runs into one CSV
    EvalSweep(commands::EvalSweepArgs),
    /// Per-observation importance-sample counts from the concentration bounds
    Bounds(commands::BoundsArgs),
    /// Run a scripted experiment preset (fig1, fig3, fig4)
    Preset(presets::PresetArgs),
}

/// Errors that indicate misuse of the interface rather than bad data.
pub(crate) struct UsageError(pub String);

pub(crate) enum CliError {
    Usage(String),
    Data(nico_core::NicoError),
}

impl From<nico_core::NicoError> for CliError {
    fn from(e: nico_core::NicoError) -> Self {
        CliError::Data(e)
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

pub(crate) type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if let Ok(threads) = std::env::var("NICO_THREADS") {
        if let Ok(n) = threads.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring unparseable NICO_THREADS={threads:?}");
        }
    }

    let result = match cli.command {
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Infer(args) => commands::run_infer(args),
        Command::Reconstruct(args) => commands::run_reconstruct(args),
        Command::Fm(args) => commands::run_fm(args),
        Command::Eval(args) => commands::run_eval(args),
        Command::EvalSweep(args) => commands::run_eval_sweep(args),
        Command::Bounds(args) => commands::run_bounds(args),
        Command::Preset(args) => presets::run_preset(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

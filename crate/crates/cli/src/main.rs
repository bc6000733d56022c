//! `hysterlab` command-line front end.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{EvaluateArgs, GenerateArgs, SimulateArgs, TrainArgs};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "hysterlab", version, about = "Hysteresis identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a reference model on a synthesized input and write a CSV dataset.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Add an estimated `xdot` column.
        #[arg(long)]
        with_xdot: bool,
    },
    /// Train a network as described by an experiment manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the manifest output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a trained model on an input CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Write `x,y_pred` pairs for loop plots.
        #[arg(long = "loop")]
        loop_export: bool,
    },
    /// Score a trained model on labelled data.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Score the prefix and the remainder separately.
        #[arg(long)]
        split: Option<f64>,
        /// Directory for metrics.csv and errors.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HYSTERLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HYSTERLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Generate { spec, signal, out, with_xdot } => {
            commands::generate(GenerateArgs { spec: &spec, signal: &signal, out: &out, with_xdot })
        }
        Command::Train { manifest, seed, out } => {
            commands::train(TrainArgs { manifest: &manifest, seed, out: out.as_deref() }).map(|_| ())
        }
        Command::Simulate { model, input, out, loop_export } => {
            commands::simulate(SimulateArgs { model: &model, input: &input, out: &out, loop_export })
        }
        Command::Evaluate { model, data, split, out } => {
            commands::evaluate(EvaluateArgs { model: &model, data: &data, split, out: out.as_deref() }).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

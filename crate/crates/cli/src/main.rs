//! `cepairs`: synthesize, featurize, train, score and evaluate
//! cause-effect pair classifiers.
//!
//! Exit status: 0 success, 1 usage error, 2 I/O error, 3 data or contract
//! error (basis mismatch, degenerate classes, malformed input).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "cepairs",
    version,
    about = "Learn causal direction from cause-effect pair samples",
    args_override_self = true
)]
struct Cli {
    /// Worker threads; 0 uses every available core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// key = value file of flag defaults for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic labelled pairs (with swapped copies).
    Synth(commands::SynthArgs),
    /// Embed pairs into a feature matrix.
    Featurize(commands::FeaturizeArgs),
    /// Fit a direction or causation model.
    Train(commands::TrainArgs),
    /// Score pairs with a trained model.
    Score(commands::ScoreArgs),
    /// Score labelled pairs and write accuracy curves and a report.
    Eval(commands::EvalArgs),
    /// Run the IGCI slope baseline.
    Igci(commands::IgciArgs),
}

fn run() -> Result<(), CliError> {
    let args = config::splice(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if usage {
                return Err(CliError::Usage(String::new()));
            }
            return Ok(());
        }
    };
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Featurize(a) => commands::featurize(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
        Command::Igci(a) => commands::igci(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("cepairs: {msg}");
            }
            ExitCode::from(e.code())
        }
    }
}

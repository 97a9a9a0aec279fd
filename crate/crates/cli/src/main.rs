//! `gmk`: batch front-end for the gesture motion kit.
//!
//! Every subcommand is deterministic given its inputs, the config, and the
//! seed; outputs are written atomically and echo the resolved configuration.

mod commands;
mod config;
mod error;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::analyze::{run_analyze, run_windows, AnalyzeArgs, WindowsArgs};
use commands::evaluate::{run_evaluate, EvaluateArgs};
use commands::stats::{run_stats, StatsArgs};
use commands::train::{run_tokenize, run_train, TokenizeArgs, TrainArgs};
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "gmk", version, about = "Gesture motion kit pipelines")]
struct Cli {
    /// Config JSON; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment words, describe motion per region, select keyframes.
    Analyze(AnalyzeArgs),
    /// Segment word timings into windows only.
    Windows(WindowsArgs),
    /// Fit a codec (for raw poses) and train the codebooks.
    TrainCodebook(TrainArgs),
    /// Quantize latents or poses against a trained codebook.
    Tokenize(TokenizeArgs),
    /// Compute FGD, rFGD, diversity, BC, and Recall@K.
    Evaluate(EvaluateArgs),
    /// Corpus statistics over intention annotations.
    Stats(StatsArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Analyze(args) => run_analyze(args, &cfg, out),
        Command::Windows(args) => run_windows(args, &cfg, out),
        Command::TrainCodebook(args) => run_train(args, &cfg, seed, out),
        Command::Tokenize(args) => run_tokenize(args, &cfg, out),
        Command::Evaluate(args) => run_evaluate(args, &cfg, out),
        Command::Stats(args) => run_stats(args, &cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_stderr_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hiercal::CalibError;

#[derive(Debug, Parser)]
#[command(name = "hiercal", version, about = "Hierarchical calibration experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Design seed; replaces `testbed.seeds`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Method tag; replaces `method.method` and `method.methods`.
    #[arg(long, global = true)]
    pub method: Option<String>,

    /// Observed output; replaces `testbed.t_obs`.
    #[arg(long = "t-obs", global = true, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub t_obs: Option<u8>,

    /// Output directory; replaces `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Write observation sets for every seed and observed output.
    GenerateData,
    /// Fit and store the GP surrogates for every seed.
    FitSurrogates,
    /// Run one method on the full data set.
    Calibrate,
    /// Confidence levels over a grid around the MAP hyperparameter.
    ConfidenceMap,
    /// Leave-one-out comparison of the configured methods.
    LooEvaluate,
    /// Collect leave-one-out summaries into one table.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenerateData => "generate-data",
            Command::FitSurrogates => "fit-surrogates",
            Command::Calibrate => "calibrate",
            Command::ConfidenceMap => "confidence-map",
            Command::LooEvaluate => "loo-evaluate",
            Command::Report => "report",
        }
    }
}

fn exit_code(e: &CalibError) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

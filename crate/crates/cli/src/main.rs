//! `mpf`: simulate, fit, predict, calibrate, evaluate, and cross-validate
//! multi-horizon forecasting models from the command line.
//!
//! Data tables and artifacts are written to the paths given by `--out`;
//! logging goes to standard error. Exit codes: 0 success, 2 usage error,
//! 3 fit failure, 4 data mismatch.

mod artifact;
mod commands;
mod config;
mod error;
mod tables;

use clap::{Parser, Subcommand};

use commands::{CalibrateArgs, CvArgs, EvaluateArgs, FitArgs, PredictArgs, SimulateArgs};
use error::CliError;

#[derive(Parser)]
#[command(name = "mpf", version, about = "Multi-horizon panel forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic panel with known coefficients
    Simulate(SimulateArgs),
    /// Fit a model to a training panel and save an artifact
    Fit(FitArgs),
    /// Produce a forecast table from an artifact and predictor data
    Predict(PredictArgs),
    /// Refit on early data and attach interval margins from late data
    Calibrate(CalibrateArgs),
    /// Score a forecast table against observed truths
    Evaluate(EvaluateArgs),
    /// Choose a basis size by cross-validation
    Cv(CvArgs),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => commands::simulate_cmd(args),
        Command::Fit(args) => commands::fit_cmd(args),
        Command::Predict(args) => commands::predict_cmd(args),
        Command::Calibrate(args) => commands::calibrate_cmd(args),
        Command::Evaluate(args) => commands::evaluate_cmd(args),
        Command::Cv(args) => commands::cv_cmd(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("mpf: {e}");
        std::process::exit(e.exit_code());
    }
}

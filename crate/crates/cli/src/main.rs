//! `ectensor`: simulate, fit, regress, classify and evaluate from the command line.

mod commands;
mod config;
mod dataset;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{classify, eval, fit, simulate, totr};
use config::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "ectensor", version, about = "Elliptically contoured tensor models")]
struct Cli {
    /// JSON file with option defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a dataset (plain, multi-class or regression) from an EC law.
    Simulate(simulate::SimulateArgs),
    /// Maximum likelihood (or Tyler) fit of the responses in a dataset.
    Fit(fit::FitArgs),
    /// Tensor-on-tensor regression, optionally sweeping CP ranks by BIC.
    Totr(totr::TotrArgs),
    /// Predict responses with a fitted regression.
    Predict(totr::PredictArgs),
    /// Train or apply a discriminant rule.
    #[command(subcommand)]
    Classify(classify::ClassifyCommand),
    /// ROC and precision-recall summaries of scored samples.
    Eval(eval::EvalArgs),
}

fn run(cli: &Cli) -> error::CliResult<()> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(a) => simulate::run(a, &cfg),
        Command::Fit(a) => fit::run(a, &cfg),
        Command::Totr(a) => totr::run(a, &cfg),
        Command::Predict(a) => totr::predict(a),
        Command::Classify(c) => classify::run(c, &cfg),
        Command::Eval(a) => eval::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

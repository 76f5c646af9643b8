//! Command-line front end: dataset generation, training, evaluation,
//! experiment sweeps, bound calculators and property checks.
//!
//! Every command writes its outputs plus one `manifest.json` into `--out`.
//! Failures surface as a single line `error[CODE]: message`.

pub mod commands;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] t2rec::error::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Violation(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "E_USAGE",
            CliError::Io(_) => "E_IO",
            CliError::Violation(_) => "E_VIOLATION",
        }
    }

    /// `error[CODE]: message` on one line.
    pub fn render(&self) -> String {
        let msg = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {msg}", self.code())
    }
}

#[derive(Debug, Parser)]
#[command(name = "t2rec", version, about = "Two-tower recommender experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Base seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of concurrently running cells.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train the two-tower model on a split of a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `gen`; generated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Tune the penalty over `lambda_grid` instead of using `t2rec.train.lambda`.
        #[arg(long)]
        tune: bool,
    },
    /// Report the RMSE of a trained model on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Model bundle written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Dataset directory supplying covariates (and ratings unless `--ratings` is given).
        #[arg(long)]
        data: PathBuf,
        /// Ratings file to score instead of the dataset's own.
        #[arg(long)]
        ratings: Option<PathBuf>,
    },
    /// Run every method over the configured scenarios and replications.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the approximation, entropy and rate calculators.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Run the gradient, embedding, perturbation and box-counting suites.
    Theorycheck {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical decay of the excess test MSE with the number of ratings.
    Rate {
        #[command(flatten)]
        common: Common,
    },
}

/// Runs a parsed command, printing its report to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { common } => commands::gen(&common),
        Command::Train { common, data, tune } => commands::train(&common, data.as_deref(), tune),
        Command::Eval {
            common,
            model,
            data,
            ratings,
        } => commands::eval(&common, &model, &data, ratings.as_deref()),
        Command::Sweep { common } => commands::sweep(&common),
        Command::Bounds { common } => commands::bounds(&common),
        Command::Theorycheck { common } => commands::theorycheck(&common),
        Command::Rate { common } => commands::rate(&common),
    }
}

//! `sharesr` command-line front end.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sharesr::data::DataError;
use sharesr::expr::{ExprError, ParseError};
use sharesr::fit::FitError;
use sharesr::procession::ProcessionError;
use sharesr::search::SearchError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error("fit failed: {0}")]
    Fit(FitError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Procession(#[from] ProcessionError),
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Expression(e) => CliError::Expression(e),
            other => CliError::Fit(other),
        }
    }
}

impl CliError {
    /// 1 for fitting and output failures, 2 for bad input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Fit(_) | CliError::Procession(_) | CliError::Output { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sharesr", version, about = "Symbolic regression with shared, partially-shared and non-shared parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the parameters of a fixed expression.
    Fit(FitArgs),
    /// Search for expressions.
    Search(SearchArgs),
    /// Check whether the data can identify every parameter of an expression.
    Check(CheckArgs),
    /// Run data-reduction processions on the synthetic quartic example.
    Procession(ProcessionArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `key = value` configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated continuous feature columns.
    #[arg(long)]
    pub features: Option<String>,
    /// Comma-separated categorical columns.
    #[arg(long)]
    pub categories: Option<String>,
    /// Target column.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Expression text, e.g. "CS1 * v1 + C1_1".
    #[arg(long)]
    pub expr: String,
    /// Initial values, one `label = value` line per individual parameter.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Write a JSON-lines record here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub population_size: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub max_complexity: Option<usize>,
    #[arg(long)]
    pub tournament_size: Option<usize>,
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    #[arg(long)]
    pub subtree_mutation_rate: Option<f64>,
    #[arg(long)]
    pub point_mutation_rate: Option<f64>,
    #[arg(long)]
    pub terminal_probability: Option<f64>,
    /// Drop the individual-parameter objective.
    #[arg(long)]
    pub no_parameter_objective: bool,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fitting threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write one JSON record per archived candidate here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print the best loss after every generation to stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub expr: String,
}

#[derive(Debug, Args)]
pub struct ProcessionArgs {
    #[arg(long, default_value_t = 100)]
    pub processions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Expression over `u` (A..D), `l` (a..c) and `v1`; defaults to the
    /// quartic example.
    #[arg(long)]
    pub expr: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub perturb_scale: f64,
    /// Fresh perturbations tried when a refit does not converge.
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Threads; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// CSV log destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Search(a) => commands::search(&a),
        Command::Check(a) => commands::check(&a),
        Command::Procession(a) => commands::procession(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line interface: fitting, paths, simulation, evaluation and the
//! simulation-study driver.

mod commands;
pub mod io;
mod reproduce;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cv::{CvConfig, CvScore};
use crate::error::{PenseError, Result};
use crate::pense::PathConfig;

pub use commands::{evaluate, fit_report, path_report, simulate, EvaluationReport, FitReport, PathReport, SimulationSpec, TruthSidecar};
pub use reproduce::{reproduce, Figure, ReproduceSpec, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "adapense", version, about = "Robust adaptive elastic-net regression via penalized S-estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the estimator with cross-validated hyper-parameters and write a JSON report.
    Fit(FitArgs),
    /// Compute a regularization path for one mixing parameter.
    Path(PathArgs),
    /// Generate a synthetic data set and its truth sidecar.
    Simulate(SimulateArgs),
    /// Score a fit report against a truth sidecar and test data.
    Evaluate(EvaluateArgs),
    /// Run a simulation study and write per-seed metrics as long-format CSV.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Tau,
    Rmse,
}

/// Estimator and cross-validation settings shared by `fit` and `reproduce`.
#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    /// Breakdown point of the S-loss.
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Tuning constant of the tau-scale used to score prediction errors.
    #[arg(long = "c-tau", default_value_t = 3.0)]
    pub c_tau: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.75, 1.0])]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
    pub zetas: Vec<f64>,
    /// Number of penalty levels per grid.
    #[arg(long = "n-lambda", default_value_t = 50)]
    pub n_lambda: usize,
    /// Smallest penalty level relative to the largest.
    #[arg(long = "lambda-ratio", default_value_t = 1e-3)]
    pub lambda_ratio: f64,
    #[arg(long, value_enum, default_value_t = ScoreArg::Tau)]
    pub score: ScoreArg,
    /// Fit the single-stage (non-adaptive) estimator.
    #[arg(long)]
    pub non_adaptive: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CvArgs {
    pub fn to_config(&self) -> Result<CvConfig> {
        let cfg = CvConfig {
            folds: self.folds,
            replications: self.replications,
            seed: self.seed,
            score: match self.score {
                ScoreArg::Tau => CvScore::Tau { c_tau: self.c_tau },
                ScoreArg::Rmse => CvScore::RootMeanSquared,
            },
            alphas: self.alphas.clone(),
            zetas: self.zetas.clone(),
            n_lambda: self.n_lambda,
            lambda_ratio: self.lambda_ratio,
            ridge_lambda_ratio: self.lambda_ratio,
            adaptive: !self.non_adaptive,
            threads: self.threads,
            path: PathConfig::with_delta(self.delta)?,
            ..CvConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file: header row, response in the first column.
    #[arg(long)]
    pub data: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMethod {
    /// Penalized S-estimates.
    Pense,
    /// Classical least-squares elastic net (non-robust baseline).
    LsEn,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = PathMethod::Pense)]
    pub method: PathMethod,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long = "n-lambda", default_value_t = 50)]
    pub n_lambda: usize,
    #[arg(long = "lambda-ratio", default_value_t = 1e-3)]
    pub lambda_ratio: f64,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioArg {
    One,
    Alternative,
    GoodLeverage,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON scenario specification; overrides the individual flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScenarioArg::One)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub p: usize,
    /// Stability parameter of the error law (2 = Normal, 1 = Cauchy).
    #[arg(long, default_value_t = 2.0)]
    pub nu: f64,
    #[arg(long)]
    pub contaminated: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Good-leverage size (good-leverage example) or good-leverage factor (scenarios).
    #[arg(long)]
    pub leverage: Option<f64>,
    /// Output CSV; the truth sidecar is written next to it as `<stem>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Fit report (any JSON with `intercept` and `beta`).
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Test data CSV.
    #[arg(long)]
    pub test: PathBuf,
    /// Reference fit report for the relative prediction performance.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long = "c-tau", default_value_t = 3.0)]
    pub c_tau: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    /// Number of seeds.
    #[arg(long, default_value_t = 50)]
    pub seeds: u64,
    #[arg(long = "first-seed", default_value_t = 1)]
    pub first_seed: u64,
    /// Predictor counts (powers of two).
    #[arg(long, value_delimiter = ',', default_values_t = [32usize])]
    pub p: Vec<usize>,
    /// Error stability parameters.
    #[arg(long, value_delimiter = ',', default_values_t = [2.0])]
    pub nu: Vec<f64>,
    /// Run clean data, contaminated data, or both.
    #[arg(long, value_enum, default_value_t = ContaminationArg::Both)]
    pub contamination: ContaminationArg,
    /// Training sample size (default: 200 for scenario 1, 100 for scenario 2).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "n-test", default_value_t = 1000)]
    pub n_test: usize,
    /// Good-leverage sizes for the good-leverage figure.
    #[arg(long, value_delimiter = ',', default_values_t = [crate::datagen::GOOD_LEVERAGE_DEFAULT])]
    pub leverage: Vec<f64>,
    /// Output CSV; the resolved configuration goes to `<stem>.config.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContaminationArg {
    Clean,
    Contaminated,
    Both,
}

/// Exit code for an error.
pub fn exit_code(err: &PenseError) -> i32 {
    match err {
        PenseError::InvalidParameter(_) => EXIT_CONFIG,
        PenseError::Convergence { .. } => EXIT_CONVERGENCE,
        PenseError::InvalidData(_)
        | PenseError::Parse { .. }
        | PenseError::Io(_)
        | PenseError::Json(_)
        | PenseError::ExactFit
        | PenseError::InvalidPreliminary(_) => EXIT_DATA,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let cfg = a.cv.to_config()?;
            let data = io::read_dataset(&a.data)?;
            let report = fit_report(&data, &cfg)?;
            io::write_json(&a.out, &report)
        }
        Command::Path(a) => {
            let data = io::read_dataset(&a.data)?;
            let report = path_report(&data, a.method, a.alpha, a.delta, a.n_lambda, a.lambda_ratio, a.threads)?;
            io::write_json(&a.out, &report)
        }
        Command::Simulate(a) => {
            let spec = match &a.config {
                Some(path) => io::read_json(path)?,
                None => SimulationSpec {
                    scenario: a.scenario,
                    n: a.n,
                    p: a.p,
                    nu: a.nu,
                    contaminated: a.contaminated,
                    seed: a.seed,
                    leverage: a.leverage,
                },
            };
            let (data, truth) = simulate(&spec)?;
            io::write_dataset(&a.out, &data)?;
            io::write_json(&sidecar_path(&a.out, "truth.json"), &truth)
        }
        Command::Evaluate(a) => {
            let report = evaluate(&a.report, &a.truth, &a.test, a.reference.as_deref(), a.c_tau)?;
            io::write_json(&a.out, &report)
        }
        Command::Reproduce(a) => {
            let spec = ReproduceSpec::from_args(&a)?;
            io::write_json(&sidecar_path(&a.out, "config.json"), &spec)?;
            reproduce(&spec, a.cv.threads, &a.out)
        }
    }
}

/// `dir/stem.csv` becomes `dir/stem.<suffix>`.
pub fn sidecar_path(out: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

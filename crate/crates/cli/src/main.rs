//! `lossboot`: posterior inference for loss-defined parameters from the
//! command line.

mod commands;
mod errors;
mod experiments;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "lossboot",
    version,
    about = "Bootstrap and general-Bayes posterior sampling for loss-defined parameters"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Loss-likelihood bootstrap: Dirichlet-weighted risk minimization per replicate
    Llb(SampleArgs),
    /// Weighted likelihood bootstrap: the loss-likelihood bootstrap under the normal negative log-likelihood
    Wlb(WlbArgs),
    /// Bayesian bootstrap of the mean functional
    Bb(BbArgs),
    /// Empirical information matrices, sandwich covariance and loss scale
    Calibrate(CalibrateArgs),
    /// General-Bayes posterior sampling via adaptive random-walk Metropolis
    Gb(GbArgs),
    /// Experiment runners emitting figure-ready CSV/JSON
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    /// Quadratic loss with identity loss covariance
    Quadratic,
    /// Normal negative log-likelihood with identity covariance
    NllNormal,
    /// Smoothed hinge margin loss over (y, z) rows
    SmoothHinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Dataset CSV (header required; smooth-hinge expects a label column named "y")
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LossKind::Quadratic)]
    pub loss: LossKind,
    /// Number of posterior draws
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker cap for replicates (0 = one per core)
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Ridge penalty on the weighted risk (smooth-hinge leaves the intercept unpenalized)
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Covariate standardization; smooth-hinge only (default on there)
    #[arg(long, value_enum)]
    pub standardize: Option<OnOff>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct WlbArgs {
    /// Dataset CSV (header required)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BbArgs {
    /// Dataset CSV (header required)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LossKind::Quadratic)]
    pub loss: LossKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ridge penalty on the empirical risk minimization (changes theta_hat; recorded in the report)
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, value_enum)]
    pub standardize: Option<OnOff>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GbArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LossKind::Quadratic)]
    pub loss: LossKind,
    /// Kept MCMC draws
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Loss scale: "auto" (plug-in estimate) or a positive real
    #[arg(long, default_value = "auto")]
    pub w: String,
    /// Prior mean per coordinate: scalar broadcast or comma-separated list
    #[arg(long, default_value = "0")]
    pub prior_mean: String,
    /// Prior sd per coordinate: scalar broadcast or comma-separated list
    #[arg(long, default_value = "10")]
    pub prior_sd: String,
    /// Burn-in steps (default: same as --B)
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Ridge penalty for the calibration fit only
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, value_enum)]
    pub standardize: Option<OnOff>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentName {
    /// Normal data, quadratic loss: exact bootstrap moments and loss-scale recovery
    NormalQuadratic,
    /// Smoothed-hinge classifier on synthetic data: misclassification and predictive curves
    SyntheticClassify,
    /// Loss-scale dispersion across sample sizes
    WVsN,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    /// Training sample size (normal-quadratic, synthetic-classify)
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Sample-size grid for w-vs-n, comma separated
    #[arg(long, default_value = "100,200,500,1000")]
    pub n_grid: String,
    /// Repetitions
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Test points for synthetic-classify
    #[arg(long, default_value_t = 10000)]
    pub test_n: usize,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Baseline ridge penalty (synthetic-classify)
    #[arg(long, default_value_t = 1.0)]
    pub ridge: f64,
    /// Prior sd for the general-Bayes classifier
    #[arg(long, default_value_t = 10.0)]
    pub prior_sd: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Llb(args) => commands::run_llb(&args),
        Command::Wlb(args) => commands::run_wlb(&args),
        Command::Bb(args) => commands::run_bb(&args),
        Command::Calibrate(args) => commands::run_calibrate(&args),
        Command::Gb(args) => commands::run_gb(&args),
        Command::Experiment(args) => experiments::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! The inference commands: llb, wlb, bb, calibrate, gb.

use std::path::Path;

use lossboot::bootstrap::{bb_mean, llb_sample, wlb_sample, BootstrapConfig, Method, PosteriorDraws};
use lossboot::calibrate::{calibration_report, w_hat};
use lossboot::data::{Dataset, LabeledDataset, Standardization};
use lossboot::gb::{gb_log_posterior, rwm_sample, GaussianPrior, McmcConfig};
use lossboot::loss::{LossModel, NormalNll, QuadraticLoss, SmoothHinge};
use lossboot::numkit::SpdMatrix;
use lossboot::optimize::{minimize_weighted_risk, OptimOptions};
use lossboot::WeightVector;

use crate::errors::CliError;
use crate::manifest::ManifestBuilder;
use crate::{BbArgs, CalibrateArgs, GbArgs, LossKind, OnOff, SampleArgs, WlbArgs};

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Quadratic => "quadratic",
            LossKind::NllNormal => "nll-normal",
            LossKind::SmoothHinge => "smooth-hinge",
        }
    }
}

/// A loaded dataset with its loss model; smooth-hinge data is packed as
/// `(y, z)` rows, standardized when requested.
pub struct Problem {
    pub dataset: Dataset,
    pub loss: Box<dyn LossModel>,
    pub standardization: Option<Standardization>,
    pub optim: OptimOptions,
}

pub fn load_problem(
    data: &Path,
    loss: LossKind,
    standardize: Option<OnOff>,
    ridge: f64,
) -> Result<Problem, CliError> {
    if ridge < 0.0 {
        return Err(CliError::Usage(format!("--ridge must be nonnegative, got {ridge}")));
    }
    if standardize.is_some() && loss != LossKind::SmoothHinge {
        return Err(CliError::Usage(
            "--standardize only applies to --loss smooth-hinge".into(),
        ));
    }
    match loss {
        LossKind::SmoothHinge => {
            let labeled = LabeledDataset::from_csv_path(data)?;
            let standardize_on = !matches!(standardize, Some(OnOff::Off));
            let (fit_data, standardization) = if standardize_on {
                let (ds, params) = labeled.standardize();
                (ds, Some(params))
            } else {
                (labeled, None)
            };
            let p = fit_data.covariate_dim();
            let optim = OptimOptions {
                ridge,
                ridge_skip: 1,
                ..OptimOptions::default()
            };
            Ok(Problem {
                dataset: fit_data.to_dataset(),
                loss: Box::new(SmoothHinge::new(p)?),
                standardization,
                optim,
            })
        }
        LossKind::Quadratic | LossKind::NllNormal => {
            let dataset = Dataset::from_csv_path(data)?;
            let p = dataset.obs_dim();
            let model: Box<dyn LossModel> = match loss {
                LossKind::Quadratic => Box::new(QuadraticLoss::standard(p)),
                _ => Box::new(NormalNll::new(SpdMatrix::identity(p), 1.0)?),
            };
            let optim = OptimOptions {
                ridge,
                ..OptimOptions::default()
            };
            Ok(Problem {
                dataset,
                loss: model,
                standardization: None,
                optim,
            })
        }
    }
}

fn write_draws(
    manifest: &mut ManifestBuilder,
    out: &Path,
    draws: &PosteriorDraws,
    extra_json: &[(&str, serde_json::Value)],
) -> Result<(), CliError> {
    manifest.write_artifact(out, "draws.csv", &draws.to_csv_string())?;
    let mut envelope = draws.to_json_envelope();
    for (key, value) in extra_json {
        envelope[*key] = value.clone();
    }
    let json = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
    manifest.write_artifact(out, "draws.json", &json)?;
    Ok(())
}

pub fn run_llb(args: &SampleArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.data, args.loss, args.standardize, args.ridge)?;
    let cfg = BootstrapConfig::new(args.b, args.seed)
        .with_threads(args.threads)
        .with_optim(problem.optim.clone());
    let draws = llb_sample(problem.loss.as_ref(), &problem.dataset, &cfg)?;

    let mut manifest = ManifestBuilder::new("llb", args.seed);
    manifest
        .flag("data", args.data.display().to_string())
        .flag("loss", args.loss.as_str())
        .flag("B", args.b)
        .flag("seed", args.seed)
        .flag("threads", args.threads)
        .flag("ridge", args.ridge)
        .flag("standardize", problem.standardization.is_some())
        .flag("standardization", &problem.standardization)
        .flag("out", args.out.display().to_string());
    manifest.dataset(&args.data)?;
    write_draws(&mut manifest, &args.out, &draws, &[])?;
    manifest.finish(&args.out)?;
    println!(
        "llb: {} draws (d={}) seed={} -> {}",
        draws.num_draws(),
        draws.dim(),
        args.seed,
        args.out.join("draws.csv").display()
    );
    Ok(())
}

pub fn run_wlb(args: &WlbArgs) -> Result<(), CliError> {
    let dataset = Dataset::from_csv_path(&args.data)?;
    let loss = NormalNll::new(SpdMatrix::identity(dataset.obs_dim()), 1.0)?;
    let cfg = BootstrapConfig::new(args.b, args.seed).with_threads(args.threads);
    let draws = wlb_sample(&loss, &dataset, &cfg)?;

    let mut manifest = ManifestBuilder::new("wlb", args.seed);
    manifest
        .flag("data", args.data.display().to_string())
        .flag("loss", "nll-normal")
        .flag("B", args.b)
        .flag("seed", args.seed)
        .flag("threads", args.threads)
        .flag("out", args.out.display().to_string());
    manifest.dataset(&args.data)?;
    write_draws(&mut manifest, &args.out, &draws, &[])?;
    manifest.finish(&args.out)?;
    println!(
        "wlb: {} draws (d={}) seed={} -> {}",
        draws.num_draws(),
        draws.dim(),
        args.seed,
        args.out.join("draws.csv").display()
    );
    Ok(())
}

pub fn run_bb(args: &BbArgs) -> Result<(), CliError> {
    let dataset = Dataset::from_csv_path(&args.data)?;
    let draws = bb_mean(&dataset, args.b, args.seed)?;

    let mut manifest = ManifestBuilder::new("bb", args.seed);
    manifest
        .flag("data", args.data.display().to_string())
        .flag("functional", "mean")
        .flag("B", args.b)
        .flag("seed", args.seed)
        .flag("out", args.out.display().to_string());
    manifest.dataset(&args.data)?;
    write_draws(&mut manifest, &args.out, &draws, &[])?;
    manifest.finish(&args.out)?;
    println!(
        "bb: {} draws (d={}) seed={} -> {}",
        draws.num_draws(),
        draws.dim(),
        args.seed,
        args.out.join("draws.csv").display()
    );
    Ok(())
}

pub fn run_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.data, args.loss, args.standardize, args.ridge)?;
    let report = calibration_report(problem.loss.as_ref(), &problem.dataset, &problem.optim)?;

    let mut manifest = ManifestBuilder::new("calibrate", args.seed);
    manifest
        .flag("data", args.data.display().to_string())
        .flag("loss", args.loss.as_str())
        .flag("seed", args.seed)
        .flag("ridge", args.ridge)
        .flag("standardize", problem.standardization.is_some())
        .flag("standardization", &problem.standardization)
        .flag("out", args.out.display().to_string());
    manifest.dataset(&args.data)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    manifest.write_artifact(&args.out, "report.json", &json)?;
    manifest.finish(&args.out)?;
    println!(
        "calibrate: n={} w_hat={} -> {}",
        report.n,
        report.w_hat,
        args.out.join("report.json").display()
    );
    Ok(())
}

fn parse_broadcast(flag: &str, raw: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let values: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    let values =
        values.map_err(|_| CliError::Usage(format!("--{flag} must be numeric, got {raw:?}")))?;
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values),
        n => Err(CliError::Usage(format!(
            "--{flag} has {n} entries but the parameter dimension is {dim}"
        ))),
    }
}

pub fn run_gb(args: &GbArgs) -> Result<(), CliError> {
    let problem = load_problem(&args.data, args.loss, args.standardize, args.ridge)?;
    let loss = problem.loss.as_ref();
    let data = &problem.dataset;
    let d = loss.param_dim();

    // the ERM centers the chain; --ridge (if any) applies to this fit only
    let weights = WeightVector::uniform(data.n())?;
    let (theta_hat, _) =
        minimize_weighted_risk(loss, data, &weights, &loss.default_init(data), &problem.optim)?;

    let w = match args.w.as_str() {
        "auto" => w_hat(loss, data, &theta_hat)?,
        raw => {
            let value: f64 = raw
                .parse()
                .map_err(|_| CliError::Usage(format!("--w must be \"auto\" or a positive real, got {raw:?}")))?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(CliError::Usage(format!("--w must be positive, got {value}")));
            }
            value
        }
    };

    let prior_mean = parse_broadcast("prior-mean", &args.prior_mean, d)?;
    let prior_sd = parse_broadcast("prior-sd", &args.prior_sd, d)?;
    if prior_sd.iter().any(|s| *s <= 0.0) {
        return Err(CliError::Usage("--prior-sd entries must be positive".into()));
    }
    let prior = GaussianPrior::new(prior_mean.clone(), prior_sd.clone())?;

    let mut cfg = McmcConfig::new(args.b, theta_hat.clone(), args.seed);
    if let Some(burnin) = args.burnin {
        cfg.burnin = burnin;
    }
    let chain = rwm_sample(|theta| gb_log_posterior(&prior, loss, w, data, theta), &cfg)?;
    let draws = PosteriorDraws::from_parts(
        chain.draws.clone(),
        Method::GbMcmc,
        args.seed,
        Some(w),
        Vec::new(),
        Vec::new(),
    )?;

    let mut manifest = ManifestBuilder::new("gb", args.seed);
    manifest
        .flag("data", args.data.display().to_string())
        .flag("loss", args.loss.as_str())
        .flag("B", args.b)
        .flag("seed", args.seed)
        .flag("w", args.w.clone())
        .flag("w_resolved", w)
        .flag("prior_mean", &prior_mean)
        .flag("prior_sd", &prior_sd)
        .flag("burnin", cfg.burnin)
        .flag("ridge", args.ridge)
        .flag("standardize", problem.standardization.is_some())
        .flag("standardization", &problem.standardization)
        .flag("theta_hat", &theta_hat)
        .flag("out", args.out.display().to_string());
    manifest.dataset(&args.data)?;
    write_draws(
        &mut manifest,
        &args.out,
        &draws,
        &[("acceptance_rate", serde_json::json!(chain.acceptance_rate))],
    )?;
    manifest.finish(&args.out)?;
    println!(
        "gb: w={} acceptance_rate={} {} draws (d={}) -> {}",
        w,
        chain.acceptance_rate,
        draws.num_draws(),
        d,
        args.out.join("draws.csv").display()
    );
    Ok(())
}

//! Experiment runners. Each writes per-repetition metrics CSV, a summary
//! JSON, and (for synthetic-classify) repetition-averaged predictive curves.

use lossboot::bootstrap::{llb_sample, BootstrapConfig, Method, PosteriorDraws};
use lossboot::calibrate::calibration_report;
use lossboot::classify::{baseline_erm, gen_synthetic, misclass_rate, ClassifierPosterior};
use lossboot::gb::{gb_log_posterior, rwm_sample, GaussianPrior, McmcConfig};
use lossboot::loss::{QuadraticLoss, SmoothHinge};
use lossboot::numkit::{derive_seed, mvn_sample, RngStream, SpdMatrix, STREAM_DATA, STREAM_TEST_SPLIT};
use lossboot::optimize::OptimOptions;
use lossboot::{Dataset, LabeledDataset};

use crate::errors::CliError;
use crate::manifest::ManifestBuilder;
use crate::{ExperimentArgs, ExperimentName};

pub fn run(args: &ExperimentArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    match args.name {
        ExperimentName::NormalQuadratic => normal_quadratic(args),
        ExperimentName::SyntheticClassify => synthetic_classify(args),
        ExperimentName::WVsN => w_vs_n(args),
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn csv_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn base_manifest(name: &str, args: &ExperimentArgs) -> ManifestBuilder {
    let mut manifest = ManifestBuilder::new(&format!("experiment {name}"), args.seed);
    manifest
        .flag("n", args.n)
        .flag("n_grid", args.n_grid.clone())
        .flag("reps", args.reps)
        .flag("test_n", args.test_n)
        .flag("B", args.b)
        .flag("seed", args.seed)
        .flag("threads", args.threads)
        .flag("ridge", args.ridge)
        .flag("prior_sd", args.prior_sd)
        .flag("out", args.out.display().to_string());
    manifest
}

/// Normal data with the standard quadratic loss: per repetition, the
/// bootstrap draw mean and variance against their exact conditional values,
/// and the plug-in loss scale (population value 1).
fn normal_quadratic(args: &ExperimentArgs) -> Result<(), CliError> {
    let n = args.n;
    let cov = SpdMatrix::identity(1);
    let loss = QuadraticLoss::standard(1);

    let mut rows = Vec::new();
    let mut w_hats = Vec::new();
    let mut var_rel_errs = Vec::new();
    let mut mean_errs = Vec::new();
    for rep in 0..args.reps {
        let rep_seed = derive_seed(args.seed, rep as u64);
        let mut rng = RngStream::new(rep_seed, STREAM_DATA);
        let data_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| mvn_sample(&[0.0], &cov, &mut rng).map_err(CliError::from))
            .collect::<Result<_, _>>()?;
        let data = Dataset::from_rows(&data_rows)?;

        let cfg = BootstrapConfig::new(args.b, rep_seed).with_threads(args.threads);
        let draws = llb_sample(&loss, &data, &cfg)?;

        let xbar = data.mean()[0];
        let draw_mean = draws.mean()[0];
        let draw_var = draws.covariance()[(0, 0)];
        let exact_var = data
            .iter_rows()
            .map(|x| (x[0] - xbar).powi(2))
            .sum::<f64>()
            / (n as f64 * (n as f64 + 1.0));
        let report = calibration_report(&loss, &data, &OptimOptions::default())?;

        let mean_err = (draw_mean - xbar).abs();
        let var_rel_err = (draw_var - exact_var).abs() / exact_var;
        rows.push(csv_row(&[
            rep as f64,
            xbar,
            draw_mean,
            mean_err,
            draw_var,
            exact_var,
            var_rel_err,
            report.w_hat,
        ]));
        w_hats.push(report.w_hat);
        var_rel_errs.push(var_rel_err);
        mean_errs.push(mean_err);
    }

    let (w_mean, w_sd) = mean_sd(&w_hats);
    let (var_err_mean, _) = mean_sd(&var_rel_errs);
    let max_mean_err = mean_errs.iter().fold(0.0f64, |a, &b| a.max(b));
    let summary = serde_json::json!({
        "experiment": "normal-quadratic",
        "n": n,
        "reps": args.reps,
        "B": args.b,
        "w_hat_mean": w_mean,
        "w_hat_sd": w_sd,
        "w_population": 1.0,
        "var_rel_err_mean": var_err_mean,
        "mean_abs_err_max": max_mean_err,
    });

    let mut manifest = base_manifest("normal-quadratic", args);
    let header = "rep,xbar,draw_mean,mean_abs_err,draw_var,exact_var,var_rel_err,w_hat";
    let csv = format!("{header}\n{}\n", rows.join("\n"));
    manifest.write_artifact(&args.out, "metrics.csv", &csv)?;
    manifest.write_artifact(
        &args.out,
        "summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    manifest.finish(&args.out)?;
    println!(
        "experiment normal-quadratic: reps={} n={} w_hat_mean={} -> {}",
        args.reps,
        n,
        w_mean,
        args.out.join("metrics.csv").display()
    );
    Ok(())
}

fn gb_classifier(
    packed: &Dataset,
    theta_hat: &[f64],
    w: f64,
    prior_sd: f64,
    draws: usize,
    seed: u64,
) -> Result<ClassifierPosterior, CliError> {
    let loss = SmoothHinge::new(packed.obs_dim() - 1)?;
    let prior = GaussianPrior::isotropic(theta_hat.len(), prior_sd)?;
    let cfg = McmcConfig::new(draws, theta_hat.to_vec(), seed);
    let chain = rwm_sample(|t| gb_log_posterior(&prior, &loss, w, packed, t), &cfg)?;
    let post = PosteriorDraws::from_parts(
        chain.draws.clone(),
        Method::GbMcmc,
        seed,
        Some(w),
        Vec::new(),
        Vec::new(),
    )?;
    Ok(ClassifierPosterior::new(post, None)?)
}

fn baseline_predictions(alpha: f64, beta: &[f64], test: &LabeledDataset) -> Vec<f64> {
    (0..test.n())
        .map(|i| {
            let score: f64 = alpha
                + beta
                    .iter()
                    .zip(test.covariate_row(i))
                    .map(|(b, z)| b * z)
                    .sum::<f64>();
            if score >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// The synthetic classification study: loss-likelihood bootstrap and
/// calibrated general-Bayes classifiers against the ridge ERM baseline, plus
/// repetition-averaged predictive-probability curves.
fn synthetic_classify(args: &ExperimentArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = (0..=60).map(|k| -3.0 + 0.1 * k as f64).collect();
    let mut curve_llb = vec![0.0; grid.len()];
    let mut curve_gb = vec![0.0; grid.len()];

    let mut rows = Vec::new();
    let mut w_hats = Vec::new();
    let mut llb_mis = Vec::new();
    let mut gb_mis = Vec::new();
    let mut base_mis = Vec::new();
    let mut marginal_draws: Option<(String, String)> = None;
    for rep in 0..args.reps {
        let rep_seed = derive_seed(args.seed, rep as u64);
        let train = gen_synthetic(args.n, &mut RngStream::new(rep_seed, STREAM_DATA));
        let test = gen_synthetic(args.test_n, &mut RngStream::new(rep_seed, STREAM_TEST_SPLIT));
        let packed = train.to_dataset();
        let hinge = SmoothHinge::new(1)?;

        let cfg = BootstrapConfig::new(args.b, rep_seed).with_threads(args.threads);
        let llb_post =
            ClassifierPosterior::new(llb_sample(&hinge, &packed, &cfg)?, None)?;

        let report = calibration_report(&hinge, &packed, &OptimOptions::default())?;
        let gb_post = gb_classifier(
            &packed,
            &report.theta_hat,
            report.w_hat,
            args.prior_sd,
            args.b,
            rep_seed,
        )?;

        // draws of the first repetition, for marginal density plots
        if rep == 0 {
            marginal_draws = Some((
                llb_post.draws().to_csv_string(),
                gb_post.draws().to_csv_string(),
            ));
        }

        let (alpha, beta) = baseline_erm(&train, args.ridge, &OptimOptions::default())?;

        let llb_rate = misclass_rate(&llb_post.predict_many(&test), test.labels())?;
        let gb_rate = misclass_rate(&gb_post.predict_many(&test), test.labels())?;
        let base_rate = misclass_rate(&baseline_predictions(alpha, &beta, &test), test.labels())?;

        for (k, z) in grid.iter().enumerate() {
            curve_llb[k] += llb_post.predictive_prob(&[*z]);
            curve_gb[k] += gb_post.predictive_prob(&[*z]);
        }

        rows.push(csv_row(&[
            rep as f64,
            report.w_hat,
            llb_rate,
            gb_rate,
            base_rate,
        ]));
        w_hats.push(report.w_hat);
        llb_mis.push(llb_rate);
        gb_mis.push(gb_rate);
        base_mis.push(base_rate);
    }

    let reps = args.reps as f64;
    let mut curves = String::from("z,prob_llb,prob_gb\n");
    for (k, z) in grid.iter().enumerate() {
        curves.push_str(&csv_row(&[*z, curve_llb[k] / reps, curve_gb[k] / reps]));
        curves.push('\n');
    }

    let (w_mean, w_sd) = mean_sd(&w_hats);
    let (llb_mean, llb_sd) = mean_sd(&llb_mis);
    let (gb_mean, gb_sd) = mean_sd(&gb_mis);
    let (base_mean, base_sd) = mean_sd(&base_mis);
    let summary = serde_json::json!({
        "experiment": "synthetic-classify",
        "n": args.n,
        "test_n": args.test_n,
        "reps": args.reps,
        "B": args.b,
        "bayes_error": 0.15865525393145707,
        "w_hat_mean": w_mean,
        "w_hat_sd": w_sd,
        "llb_misclass_mean": llb_mean,
        "llb_misclass_sd": llb_sd,
        "gb_misclass_mean": gb_mean,
        "gb_misclass_sd": gb_sd,
        "baseline_misclass_mean": base_mean,
        "baseline_misclass_sd": base_sd,
    });

    let mut manifest = base_manifest("synthetic-classify", args);
    let header = "rep,w_hat,llb_misclass,gb_misclass,baseline_misclass";
    let csv = format!("{header}\n{}\n", rows.join("\n"));
    manifest.write_artifact(&args.out, "metrics.csv", &csv)?;
    manifest.write_artifact(&args.out, "curves.csv", &curves)?;
    if let Some((llb_csv, gb_csv)) = marginal_draws {
        manifest.write_artifact(&args.out, "draws_llb.csv", &llb_csv)?;
        manifest.write_artifact(&args.out, "draws_gb.csv", &gb_csv)?;
    }
    manifest.write_artifact(
        &args.out,
        "summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    manifest.finish(&args.out)?;
    println!(
        "experiment synthetic-classify: reps={} n={} llb={} gb={} baseline={} -> {}",
        args.reps,
        args.n,
        llb_mean,
        gb_mean,
        base_mean,
        args.out.join("metrics.csv").display()
    );
    Ok(())
}

/// Plug-in loss-scale dispersion across sample sizes on the synthetic
/// classification problem.
fn w_vs_n(args: &ExperimentArgs) -> Result<(), CliError> {
    let grid: Result<Vec<usize>, _> = args
        .n_grid
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect();
    let grid = grid.map_err(|_| {
        CliError::Usage(format!("--n-grid must be comma-separated integers, got {:?}", args.n_grid))
    })?;
    if grid.is_empty() || grid.contains(&0) {
        return Err(CliError::Usage("--n-grid entries must be positive".into()));
    }

    let hinge = SmoothHinge::new(1)?;
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for &n in &grid {
        let mut w_hats = Vec::new();
        for rep in 0..args.reps {
            let salt = ((n as u64) << 32) | rep as u64;
            let rep_seed = derive_seed(args.seed, salt);
            let train = gen_synthetic(n, &mut RngStream::new(rep_seed, STREAM_DATA));
            let packed = train.to_dataset();
            let report = calibration_report(&hinge, &packed, &OptimOptions::default())?;
            rows.push(csv_row(&[n as f64, rep as f64, report.w_hat]));
            w_hats.push(report.w_hat);
        }
        let (mean, sd) = mean_sd(&w_hats);
        per_n.push(serde_json::json!({"n": n, "w_hat_mean": mean, "w_hat_sd": sd}));
    }

    let summary = serde_json::json!({
        "experiment": "w-vs-n",
        "reps": args.reps,
        "per_n": per_n,
    });

    let mut manifest = base_manifest("w-vs-n", args);
    let csv = format!("n,rep,w_hat\n{}\n", rows.join("\n"));
    manifest.write_artifact(&args.out, "metrics.csv", &csv)?;
    manifest.write_artifact(
        &args.out,
        "summary.json",
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    manifest.finish(&args.out)?;
    println!(
        "experiment w-vs-n: reps={} grid={:?} -> {}",
        args.reps,
        grid,
        args.out.join("metrics.csv").display()
    );
    Ok(())
}

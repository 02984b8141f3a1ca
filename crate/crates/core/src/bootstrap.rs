//! Bootstrap posterior sampling: B independent Dirichlet-weighted risk
//! minimizations, parallel across replicates.
//!
//! Replicate `j` draws its weights from stream `(seed, j)`, so results are
//! bit-identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::loss::LossModel;
use crate::numkit::{dirichlet_uniform, Matrix, NumError, RngStream, WeightVector};
use crate::optimize::{minimize_weighted_risk, OptimError, OptimOptions};

#[derive(Debug, Error)]
pub enum BootstrapError {
    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: u64,
        #[source]
        source: OptimError,
    },
    #[error("replicate {replicate}: functional failed: {message}")]
    Functional { replicate: u64, message: String },
    #[error("all {total} replicates failed; first error: {first}")]
    AllReplicatesFailed { total: usize, first: String },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// How the draws were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Llb,
    Wlb,
    Bb,
    GbMcmc,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Llb => "llb",
            Method::Wlb => "wlb",
            Method::Bb => "bb",
            Method::GbMcmc => "gb-mcmc",
        };
        f.write_str(s)
    }
}

/// What to do when a replicate's optimization fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplicatePolicy {
    /// Surface the first failure (no silent sample bias).
    #[default]
    FailFast,
    /// Drop failing replicates and report them in the output.
    SkipAndReport,
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Worker cap; 0 means one worker per available core.
    pub threads: usize,
    pub policy: ReplicatePolicy,
    pub optim: OptimOptions,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapConfig {
            replicates,
            seed,
            threads: 1,
            policy: ReplicatePolicy::FailFast,
            optim: OptimOptions::default(),
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_policy(mut self, policy: ReplicatePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_optim(mut self, optim: OptimOptions) -> Self {
        self.optim = optim;
        self
    }
}

/// Per-draw optimizer record.
#[derive(Debug, Clone, Serialize)]
pub struct DrawDiagnostics {
    pub replicate: u64,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedReplicate {
    pub replicate: u64,
    pub error: String,
}

/// Posterior draws with provenance.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    draws: Matrix,
    method: Method,
    seed: u64,
    w: Option<f64>,
    diagnostics: Vec<DrawDiagnostics>,
    skipped: Vec<SkippedReplicate>,
}

impl PosteriorDraws {
    pub fn from_parts(
        draws: Matrix,
        method: Method,
        seed: u64,
        w: Option<f64>,
        diagnostics: Vec<DrawDiagnostics>,
        skipped: Vec<SkippedReplicate>,
    ) -> Result<Self, BootstrapError> {
        if draws.rows() == 0 {
            return Err(BootstrapError::Invalid("need at least one draw".into()));
        }
        if !draws.all_finite() {
            return Err(BootstrapError::Invalid("non-finite draw".into()));
        }
        Ok(PosteriorDraws {
            draws,
            method,
            seed,
            w,
            diagnostics,
            skipped,
        })
    }

    pub fn num_draws(&self) -> usize {
        self.draws.rows()
    }

    pub fn dim(&self) -> usize {
        self.draws.cols()
    }

    pub fn draw(&self, j: usize) -> &[f64] {
        self.draws.row(j)
    }

    pub fn draws(&self) -> &Matrix {
        &self.draws
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn w(&self) -> Option<f64> {
        self.w
    }

    pub fn diagnostics(&self) -> &[DrawDiagnostics] {
        &self.diagnostics
    }

    pub fn skipped(&self) -> &[SkippedReplicate] {
        &self.skipped
    }

    /// Coordinate-wise mean over draws.
    pub fn mean(&self) -> Vec<f64> {
        let b = self.num_draws() as f64;
        let mut m = vec![0.0; self.dim()];
        for j in 0..self.num_draws() {
            for (mk, v) in m.iter_mut().zip(self.draw(j)) {
                *mk += v;
            }
        }
        for mk in &mut m {
            *mk /= b;
        }
        m
    }

    /// Sample covariance of the draws (`1/(B-1)`).
    pub fn covariance(&self) -> Matrix {
        let mean = self.mean();
        let d = self.dim();
        let mut c = Matrix::zeros(d, d);
        let mut centered = vec![0.0; d];
        for j in 0..self.num_draws() {
            for (k, v) in centered.iter_mut().enumerate() {
                *v = self.draw(j)[k] - mean[k];
            }
            c.add_outer(&centered, 1.0);
        }
        c.scaled(1.0 / (self.num_draws() as f64 - 1.0).max(1.0))
    }

    /// One column of the draw matrix.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.num_draws()).map(|j| self.draw(j)[k]).collect()
    }

    /// CSV: header `θ_1..θ_d`, one row per draw, shortest round-trip decimal
    /// rendering.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim()).map(|k| format!("θ_{k}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for j in 0..self.num_draws() {
            let row: Vec<String> = self.draw(j).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// JSON envelope bundling the draws with their provenance.
    pub fn to_json_envelope(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.num_draws()).map(|j| self.draw(j).to_vec()).collect();
        serde_json::json!({
            "method": self.method,
            "seed": self.seed,
            "w": self.w,
            "draws_count": self.num_draws(),
            "dim": self.dim(),
            "skipped": self.skipped,
            "draws": rows,
        })
    }
}

fn run_replicates<F>(
    n: usize,
    dim: usize,
    cfg_threads: usize,
    policy: ReplicatePolicy,
    total: usize,
    run_one: F,
) -> Result<(Matrix, Vec<DrawDiagnostics>, Vec<SkippedReplicate>), BootstrapError>
where
    F: Fn(u64) -> Result<(Vec<f64>, DrawDiagnostics), BootstrapError> + Sync,
{
    if n == 0 {
        return Err(BootstrapError::Invalid("empty dataset".into()));
    }
    if total == 0 {
        return Err(BootstrapError::Invalid("need at least one replicate".into()));
    }
    let results: Vec<Result<(Vec<f64>, DrawDiagnostics), BootstrapError>> = if cfg_threads == 1 {
        (0..total as u64).map(&run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg_threads)
            .build()
            .map_err(|e| BootstrapError::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..total as u64).into_par_iter().map(&run_one).collect())
    };

    let mut rows = Vec::with_capacity(total);
    let mut diagnostics = Vec::with_capacity(total);
    let mut skipped = Vec::new();
    for (j, res) in results.into_iter().enumerate() {
        match res {
            Ok((row, diag)) => {
                rows.push(row);
                diagnostics.push(diag);
            }
            Err(err) => match policy {
                ReplicatePolicy::FailFast => return Err(err),
                ReplicatePolicy::SkipAndReport => skipped.push(SkippedReplicate {
                    replicate: j as u64,
                    error: err.to_string(),
                }),
            },
        }
    }
    if rows.is_empty() {
        return Err(BootstrapError::AllReplicatesFailed {
            total,
            first: skipped
                .first()
                .map(|s| s.error.clone())
                .unwrap_or_default(),
        });
    }
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for r in &rows {
        flat.extend_from_slice(r);
    }
    let draws = Matrix::from_flat(rows.len(), dim, flat).map_err(BootstrapError::Num)?;
    Ok((draws, diagnostics, skipped))
}

/// The loss-likelihood bootstrap: replicate `j` minimizes the
/// Dirichlet(1,...,1)-weighted empirical risk with weights from stream
/// `(seed, j)`.
///
/// Replicates are warm-started from the uniform-weight minimizer when it
/// exists; each replicate is still converged to the gradient tolerance, so
/// the warm start only saves iterations.
pub fn llb_sample<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    cfg: &BootstrapConfig,
) -> Result<PosteriorDraws, BootstrapError> {
    sample_with_method(loss, data, cfg, Method::Llb)
}

/// The weighted likelihood bootstrap: the loss-likelihood bootstrap applied
/// to a negative log-likelihood loss. Draw-for-draw identical to
/// [`llb_sample`] under the same seed.
pub fn wlb_sample<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    cfg: &BootstrapConfig,
) -> Result<PosteriorDraws, BootstrapError> {
    sample_with_method(loss, data, cfg, Method::Wlb)
}

fn sample_with_method<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    cfg: &BootstrapConfig,
    method: Method,
) -> Result<PosteriorDraws, BootstrapError> {
    let init = match minimize_weighted_risk(
        loss,
        data,
        &WeightVector::uniform(data.n())?,
        &loss.default_init(data),
        &cfg.optim,
    ) {
        Ok((erm, _)) => erm,
        // fall back to the cold start; replicates re-converge regardless
        Err(_) => loss.default_init(data),
    };

    let run_one = |j: u64| -> Result<(Vec<f64>, DrawDiagnostics), BootstrapError> {
        let mut rng = RngStream::new(cfg.seed, j);
        let weights = dirichlet_uniform(data.n(), &mut rng)?;
        let (theta, diag) = minimize_weighted_risk(loss, data, &weights, &init, &cfg.optim)
            .map_err(|source| BootstrapError::Replicate { replicate: j, source })?;
        Ok((
            theta,
            DrawDiagnostics {
                replicate: j,
                iterations: diag.iterations,
                grad_inf_norm: diag.grad_inf_norm,
            },
        ))
    };

    let (draws, diagnostics, skipped) = run_replicates(
        data.n(),
        loss.param_dim(),
        cfg.threads,
        cfg.policy,
        cfg.replicates,
        run_one,
    )?;
    PosteriorDraws::from_parts(draws, method, cfg.seed, None, diagnostics, skipped)
}

/// The Bayesian bootstrap over an arbitrary total functional of the weighted
/// empirical distribution: draw `j` is `functional(data, g_j)` with
/// Dirichlet(1,...,1) weights from stream `(seed, j)`.
pub fn bb_functional<F>(
    data: &Dataset,
    functional: F,
    replicates: usize,
    seed: u64,
) -> Result<PosteriorDraws, BootstrapError>
where
    F: Fn(&Dataset, &WeightVector) -> Result<Vec<f64>, String>,
{
    if replicates == 0 {
        return Err(BootstrapError::Invalid("need at least one replicate".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(replicates);
    let mut diagnostics = Vec::with_capacity(replicates);
    let mut dim = None;
    for j in 0..replicates as u64 {
        let mut rng = RngStream::new(seed, j);
        let weights = dirichlet_uniform(data.n(), &mut rng)?;
        let value = functional(data, &weights)
            .map_err(|message| BootstrapError::Functional { replicate: j, message })?;
        match dim {
            None => dim = Some(value.len()),
            Some(d) if d != value.len() => {
                return Err(BootstrapError::Functional {
                    replicate: j,
                    message: format!("functional output length changed from {d} to {}", value.len()),
                })
            }
            _ => {}
        }
        diagnostics.push(DrawDiagnostics {
            replicate: j,
            iterations: 0,
            grad_inf_norm: 0.0,
        });
        rows.push(value);
    }
    let dim = dim.unwrap_or(0);
    if dim == 0 {
        return Err(BootstrapError::Invalid("functional produced empty output".into()));
    }
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for r in &rows {
        flat.extend_from_slice(r);
    }
    let draws = Matrix::from_flat(rows.len(), dim, flat).map_err(BootstrapError::Num)?;
    PosteriorDraws::from_parts(draws, Method::Bb, seed, None, diagnostics, Vec::new())
}

/// The weighted mean, i.e. the mean functional of the weighted empirical
/// distribution.
pub fn weighted_mean(data: &Dataset, weights: &WeightVector) -> Vec<f64> {
    let mut m = vec![0.0; data.obs_dim()];
    for (i, x) in data.iter_rows().enumerate() {
        for (mk, v) in m.iter_mut().zip(x) {
            *mk += weights[i] * v;
        }
    }
    m
}

/// Bayesian bootstrap of the mean functional.
pub fn bb_mean(data: &Dataset, replicates: usize, seed: u64) -> Result<PosteriorDraws, BootstrapError> {
    bb_functional(data, |d, w| Ok(weighted_mean(d, w)), replicates, seed)
}

//! The general-Bayes posterior: unnormalized log density
//! `log p(theta) - w * sum_i l(theta, x_i)`, adaptive random-walk Metropolis
//! sampling, and the exact conjugate posterior for the quadratic loss.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::loss::LossModel;
use crate::numkit::{Cholesky, Matrix, NumError, RngStream, SpdMatrix, STREAM_MCMC};

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("log posterior is not finite at the chain start ({value})")]
    NonFiniteInit { value: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Independent normal prior per coordinate.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianPrior {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self, NumError> {
        if mean.len() != sd.len() {
            return Err(NumError::DimensionMismatch(format!(
                "prior mean has length {}, sd has length {}",
                mean.len(),
                sd.len()
            )));
        }
        if mean.is_empty() {
            return Err(NumError::InvalidArgument("empty prior".into()));
        }
        if sd.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(NumError::InvalidArgument("prior sd must be positive".into()));
        }
        Ok(GaussianPrior { mean, sd })
    }

    /// `N(0, sd^2)` on every coordinate.
    pub fn isotropic(dim: usize, sd: f64) -> Result<Self, NumError> {
        GaussianPrior::new(vec![0.0; dim], vec![sd; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        let mut lp = 0.0;
        for ((t, m), s) in theta.iter().zip(&self.mean).zip(&self.sd) {
            let z = (t - m) / s;
            lp -= 0.5 * z * z + s.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }
}

/// Unnormalized general-Bayes log posterior:
/// `log p(theta) - w * sum_i l(theta, x_i)` (losses add over observations).
pub fn gb_log_posterior<L: LossModel + ?Sized>(
    prior: &GaussianPrior,
    loss: &L,
    w: f64,
    data: &Dataset,
    theta: &[f64],
) -> f64 {
    debug_assert!(w > 0.0);
    let total: f64 = data.iter_rows().map(|x| loss.value(theta, x)).sum();
    prior.log_density(theta) - w * total
}

/// Random-walk Metropolis configuration.
///
/// The step scale adapts only during burn-in (Robbins-Monro on the log scale
/// toward `target_accept`, with a pilot proposal covariance estimated halfway
/// through); the kernel is frozen before any kept draw.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub draws: usize,
    pub burnin: usize,
    pub init: Vec<f64>,
    pub target_accept: f64,
    pub adapt_window: usize,
    pub seed: u64,
    pub stream_id: u64,
    /// Fixed proposal covariance shape; skips the pilot estimate.
    pub proposal_cov: Option<SpdMatrix>,
}

impl McmcConfig {
    pub fn new(draws: usize, init: Vec<f64>, seed: u64) -> Self {
        McmcConfig {
            draws,
            burnin: draws,
            init,
            target_accept: 0.234,
            adapt_window: 50,
            seed,
            stream_id: STREAM_MCMC,
            proposal_cov: None,
        }
    }

    fn validate(&self) -> Result<(), McmcError> {
        if self.draws == 0 {
            return Err(McmcError::Invalid("need at least one draw".into()));
        }
        if self.init.is_empty() {
            return Err(McmcError::Invalid("empty init".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(McmcError::Invalid("target_accept must be in (0,1)".into()));
        }
        if self.adapt_window == 0 {
            return Err(McmcError::Invalid("adapt_window must be positive".into()));
        }
        if let Some(cov) = &self.proposal_cov {
            if cov.dim() != self.init.len() {
                return Err(McmcError::Invalid(format!(
                    "proposal covariance is {}x{} but the chain is {}-dimensional",
                    cov.dim(),
                    cov.dim(),
                    self.init.len()
                )));
            }
        }
        Ok(())
    }
}

/// A sampled chain: kept draws, their acceptance rate, and the step-scale
/// adaptation trace (one entry per adaptation window).
#[derive(Debug, Clone)]
pub struct Chain {
    pub draws: Matrix,
    pub acceptance_rate: f64,
    pub step_scales: Vec<f64>,
}

impl Chain {
    pub fn num_draws(&self) -> usize {
        self.draws.rows()
    }

    pub fn dim(&self) -> usize {
        self.draws.cols()
    }

    pub fn draw(&self, j: usize) -> &[f64] {
        self.draws.row(j)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.num_draws()).map(|j| self.draw(j)[k]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for j in 0..self.num_draws() {
            for (mk, v) in m.iter_mut().zip(self.draw(j)) {
                *mk += v;
            }
        }
        for mk in &mut m {
            *mk /= self.num_draws() as f64;
        }
        m
    }

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
}

struct Walker<'a, F: Fn(&[f64]) -> f64> {
    logpost: &'a F,
    theta: Vec<f64>,
    lp: f64,
    rng: RngStream,
    proposal_chol: Option<Cholesky>,
    eps: Vec<f64>,
}

impl<'a, F: Fn(&[f64]) -> f64> Walker<'a, F> {
    /// One Metropolis step at step scale `sigma`; returns true on acceptance.
    fn step(&mut self, sigma: f64) -> bool {
        for e in self.eps.iter_mut() {
            *e = StandardNormal.sample(&mut self.rng);
        }
        let mut proposal = self.theta.clone();
        match &self.proposal_chol {
            Some(chol) => {
                let step = chol.mul_lower(&self.eps);
                for (p, s) in proposal.iter_mut().zip(&step) {
                    *p += sigma * s;
                }
            }
            None => {
                for (p, e) in proposal.iter_mut().zip(&self.eps) {
                    *p += sigma * e;
                }
            }
        }
        let lp_new = (self.logpost)(&proposal);
        let log_ratio = lp_new - self.lp;
        let accept = log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp();
        if accept && lp_new.is_finite() {
            self.theta = proposal;
            self.lp = lp_new;
            true
        } else {
            false
        }
    }
}

/// Gaussian-proposal random-walk Metropolis with burn-in-only adaptation.
///
/// Burn-in runs in two halves: the first adapts a scalar step scale with
/// identity proposal shape; a pilot covariance is then estimated from the
/// first half's states and the second half re-adapts the scale on that
/// shape. The kernel is fixed for all kept draws, so they target the exact
/// posterior.
pub fn rwm_sample<F: Fn(&[f64]) -> f64>(logpost: F, cfg: &McmcConfig) -> Result<Chain, McmcError> {
    cfg.validate()?;
    let d = cfg.init.len();
    let lp0 = logpost(&cfg.init);
    if !lp0.is_finite() {
        return Err(McmcError::NonFiniteInit { value: lp0 });
    }

    let mut walker = Walker {
        logpost: &logpost,
        theta: cfg.init.clone(),
        lp: lp0,
        rng: RngStream::new(cfg.seed, cfg.stream_id),
        proposal_chol: cfg.proposal_cov.as_ref().map(|c| c.cholesky().clone()),
        eps: vec![0.0; d],
    };

    let base_scale = 2.38 / (d as f64).sqrt();
    let mut log_sigma = base_scale.ln();
    let mut step_scales = Vec::new();

    let pilot_phase = if cfg.proposal_cov.is_some() { 0 } else { cfg.burnin / 2 };

    // phase A: identity shape (or the fixed user shape), adapting the scale
    let mut pilot_states: Vec<Vec<f64>> = Vec::new();
    let mut window_accepts = 0usize;
    let mut window_steps = 0usize;
    let mut window_index = 0usize;
    let adapt = |log_sigma: &mut f64,
                     window_accepts: &mut usize,
                     window_steps: &mut usize,
                     window_index: &mut usize,
                     step_scales: &mut Vec<f64>| {
        if *window_steps == cfg.adapt_window {
            *window_index += 1;
            let rate = *window_accepts as f64 / *window_steps as f64;
            let gain = 1.0 / (*window_index as f64).sqrt();
            *log_sigma += gain * (rate - cfg.target_accept);
            *log_sigma = log_sigma.clamp(-27.0, 27.0);
            step_scales.push(log_sigma.exp());
            *window_accepts = 0;
            *window_steps = 0;
        }
    };

    for t in 0..cfg.burnin {
        if t == pilot_phase && pilot_phase > 0 {
            // switch the proposal shape to the pilot covariance and restart
            // the scale adaptation on it
            if let Some(chol) = pilot_covariance(&pilot_states, d) {
                walker.proposal_chol = Some(chol);
                log_sigma = base_scale.ln();
                window_accepts = 0;
                window_steps = 0;
                window_index = 0;
            }
        }
        let accepted = walker.step(log_sigma.exp());
        window_accepts += accepted as usize;
        window_steps += 1;
        adapt(
            &mut log_sigma,
            &mut window_accepts,
            &mut window_steps,
            &mut window_index,
            &mut step_scales,
        );
        if pilot_phase > 0 && t < pilot_phase && 2 * t >= pilot_phase {
            pilot_states.push(walker.theta.clone());
        }
    }

    // frozen kernel for kept draws
    let sigma = log_sigma.exp();
    let mut draws = Matrix::zeros(cfg.draws, d);
    let mut accepts = 0usize;
    for j in 0..cfg.draws {
        accepts += walker.step(sigma) as usize;
        draws.row_mut(j).copy_from_slice(&walker.theta);
    }

    Ok(Chain {
        draws,
        acceptance_rate: accepts as f64 / cfg.draws as f64,
        step_scales,
    })
}

/// Sample covariance of the pilot states, mildly regularized so the factor
/// exists even if the walker barely moved. Returns `None` when there are too
/// few states to say anything.
fn pilot_covariance(states: &[Vec<f64>], d: usize) -> Option<Cholesky> {
    if states.len() < (4 * d).max(10) {
        return None;
    }
    let n = states.len() as f64;
    let mut mean = vec![0.0; d];
    for s in states {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for s in states {
        for (k, c) in centered.iter_mut().enumerate() {
            *c = s[k] - mean[k];
        }
        cov.add_outer(&centered, 1.0);
    }
    cov = cov.scaled(1.0 / (n - 1.0));
    let ridge = (cov.trace() / d as f64).max(1e-300) * 1e-8;
    for k in 0..d {
        cov[(k, k)] += ridge;
    }
    Cholesky::factor(&cov).ok()
}

/// Batch-means Monte Carlo standard error for the mean of an autocorrelated
/// scalar chain.
pub fn mcmc_standard_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let num_batches = (n as f64).sqrt().floor() as usize;
    let batch = n / num_batches;
    let used = num_batches * batch;
    let means: Vec<f64> = (0..num_batches)
        .map(|k| x[k * batch..(k + 1) * batch].iter().sum::<f64>() / batch as f64)
        .collect();
    let grand = x[..used].iter().sum::<f64>() / used as f64;
    let var_bm = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (num_batches as f64 - 1.0);
    (var_bm / num_batches as f64).sqrt()
}

/// Exact general-Bayes posterior for the quadratic loss under an independent
/// normal prior: a Gaussian with precision
/// `P = diag(sd^{-2}) + n w Sigma1^{-1}` and mean
/// `P^{-1} (diag(sd^{-2}) m + w Sigma1^{-1} sum_i x_i)`.
pub fn gb_quadratic_conjugate(
    prior: &GaussianPrior,
    sigma1: &SpdMatrix,
    w: f64,
    data: Option<&Dataset>,
) -> Result<(Vec<f64>, SpdMatrix), NumError> {
    let d = prior.dim();
    if sigma1.dim() != d {
        return Err(NumError::DimensionMismatch(format!(
            "prior dim {d} vs Sigma1 dim {}",
            sigma1.dim()
        )));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(NumError::InvalidArgument(format!("w must be positive, got {w}")));
    }
    let n = data.map_or(0, |ds| ds.n());
    if let Some(ds) = data {
        if ds.obs_dim() != d {
            return Err(NumError::DimensionMismatch(format!(
                "data dim {} vs prior dim {d}",
                ds.obs_dim()
            )));
        }
    }

    let sigma1_inv = sigma1.cholesky().inverse();
    let mut precision = sigma1_inv.scaled(n as f64 * w);
    let mut h = vec![0.0; d];
    for k in 0..d {
        let prior_prec = 1.0 / (prior.sd[k] * prior.sd[k]);
        precision[(k, k)] += prior_prec;
        h[k] = prior_prec * prior.mean[k];
    }
    if let Some(ds) = data {
        let mut sum_x = vec![0.0; d];
        for x in ds.iter_rows() {
            for (s, v) in sum_x.iter_mut().zip(x) {
                *s += v;
            }
        }
        let data_term = sigma1_inv.mul_vec(&sum_x);
        for (hk, v) in h.iter_mut().zip(&data_term) {
            *hk += w * v;
        }
    }
    let precision = SpdMatrix::new(precision)?;
    let mean = precision.solve(&h);
    let cov = precision.inverse();
    Ok((mean, cov))
}

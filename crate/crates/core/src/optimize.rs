//! Weighted empirical risk minimization: damped Newton with backtracking
//! line search, the inner step of every bootstrap replicate.

use thiserror::Error;

use crate::data::Dataset;
use crate::loss::LossModel;
use crate::numkit::{dot, inf_norm, l2_norm, Cholesky, Matrix, WeightVector};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("max-iterations: gradient inf-norm {grad_inf_norm:.3e} after {iterations} iterations (tol {tol:.1e})")]
    MaxIterations {
        iterations: usize,
        grad_inf_norm: f64,
        tol: f64,
    },
    #[error("divergence-suspected: |theta| = {theta_norm:.3e} exceeded {bound:.3e}; the weighted risk may have no finite minimizer (consider a ridge penalty)")]
    DivergenceSuspected { theta_norm: f64, bound: f64 },
    #[error("line search failed at iteration {iteration} with damping {damping:.3e}")]
    LineSearchFailed { iteration: usize, damping: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Options for [`minimize_weighted_risk`].
///
/// `ridge` adds `(ridge/2) * |theta|^2` to the weighted risk; `ridge_skip`
/// leaves that many leading coordinates unpenalized (1 for classification
/// losses whose intercept comes first).
#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub damping: f64,
    pub ridge: f64,
    pub ridge_skip: usize,
    pub divergence_norm: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iter: 200,
            grad_tol: 1e-8,
            damping: 1e-6,
            ridge: 0.0,
            ridge_skip: 0,
            divergence_norm: 1e6,
        }
    }
}

impl OptimOptions {
    fn validate(&self) -> Result<(), OptimError> {
        if self.max_iter == 0 || self.grad_tol <= 0.0 || self.damping <= 0.0 || self.divergence_norm <= 0.0 {
            return Err(OptimError::Invalid("tolerances must be positive".into()));
        }
        if self.ridge < 0.0 {
            return Err(OptimError::Invalid("ridge must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-run convergence record.
#[derive(Debug, Clone)]
pub struct OptimDiagnostics {
    pub iterations: usize,
    pub grad_inf_norm: f64,
    /// Objective value at every accepted iterate, starting point included.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_DAMPING: f64 = 1e16;

struct WeightedRisk<'a, L: LossModel + ?Sized> {
    loss: &'a L,
    data: &'a Dataset,
    weights: &'a [f64],
    ridge: f64,
    ridge_skip: usize,
}

impl<'a, L: LossModel + ?Sized> WeightedRisk<'a, L> {
    fn value(&self, theta: &[f64]) -> f64 {
        let mut r = 0.0;
        for (i, x) in self.data.iter_rows().enumerate() {
            r += self.weights[i] * self.loss.value(theta, x);
        }
        if self.ridge > 0.0 {
            let pen: f64 = theta[self.ridge_skip.min(theta.len())..]
                .iter()
                .map(|t| t * t)
                .sum();
            r += 0.5 * self.ridge * pen;
        }
        r
    }

    fn grad(&self, theta: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        for (i, x) in self.data.iter_rows().enumerate() {
            self.loss.grad_into(theta, x, scratch);
            let w = self.weights[i];
            for (o, g) in out.iter_mut().zip(scratch.iter()) {
                *o += w * g;
            }
        }
        if self.ridge > 0.0 {
            for (o, t) in out.iter_mut().zip(theta).skip(self.ridge_skip) {
                *o += self.ridge * t;
            }
        }
    }

    fn hess(&self, theta: &[f64], out: &mut Matrix, scratch: &mut Matrix) {
        out.fill(0.0);
        for (i, x) in self.data.iter_rows().enumerate() {
            self.loss.hess_into(theta, x, scratch);
            out.add_assign_scaled(scratch, self.weights[i]);
        }
        if self.ridge > 0.0 {
            for j in self.ridge_skip..theta.len() {
                out[(j, j)] += self.ridge;
            }
        }
    }
}

/// Minimizes `sum_i g_i l(theta, x_i)` over `theta` from `init`.
///
/// Damped Newton: solve `(H + lambda I) s = -g` via Cholesky, falling back to
/// the steepest-descent direction when the damped system is not positive
/// definite; Armijo backtracking with halving; `lambda` grows tenfold on a
/// failed line search and halves on accepted steps.
pub fn minimize_weighted_risk<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    weights: &WeightVector,
    init: &[f64],
    opts: &OptimOptions,
) -> Result<(Vec<f64>, OptimDiagnostics), OptimError> {
    opts.validate()?;
    if weights.len() != data.n() {
        return Err(OptimError::Invalid(format!(
            "{} weights for {} observations",
            weights.len(),
            data.n()
        )));
    }
    if data.obs_dim() != loss.obs_dim() {
        return Err(OptimError::Invalid(format!(
            "observation dim {} does not match loss obs dim {}",
            data.obs_dim(),
            loss.obs_dim()
        )));
    }
    let d = loss.param_dim();
    if init.len() != d {
        return Err(OptimError::Invalid(format!(
            "init has length {}, parameter dim is {d}",
            init.len()
        )));
    }

    let risk = WeightedRisk {
        loss,
        data,
        weights: weights.as_slice(),
        ridge: opts.ridge,
        ridge_skip: opts.ridge_skip,
    };

    let mut theta = init.to_vec();
    let mut lambda = opts.damping;
    let mut g = vec![0.0; d];
    let mut g_scratch = vec![0.0; d];
    let mut h = Matrix::zeros(d, d);
    let mut h_scratch = Matrix::zeros(d, d);
    let mut trace = Vec::new();
    let mut value = risk.value(&theta);

    for iter in 0..=opts.max_iter {
        risk.grad(&theta, &mut g, &mut g_scratch);
        let gn = inf_norm(&g);
        trace.push(value);
        if gn <= opts.grad_tol {
            return Ok((
                theta,
                OptimDiagnostics {
                    iterations: iter,
                    grad_inf_norm: gn,
                    objective_trace: trace,
                    converged: true,
                },
            ));
        }
        let tn = l2_norm(&theta);
        if tn > opts.divergence_norm {
            return Err(OptimError::DivergenceSuspected {
                theta_norm: tn,
                bound: opts.divergence_norm,
            });
        }
        if iter == opts.max_iter {
            return Err(OptimError::MaxIterations {
                iterations: opts.max_iter,
                grad_inf_norm: gn,
                tol: opts.grad_tol,
            });
        }

        risk.hess(&theta, &mut h, &mut h_scratch);
        loop {
            let mut damped = h.clone();
            for j in 0..d {
                damped[(j, j)] += lambda;
            }
            let (dir, slope) = match Cholesky::factor(&damped) {
                Ok(chol) => {
                    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
                    let s = chol.solve(&neg_g);
                    let slope = dot(&g, &s);
                    if slope < 0.0 {
                        (s, slope)
                    } else {
                        // numerically indefinite solve; take the gradient direction
                        (neg_g, -dot(&g, &g))
                    }
                }
                Err(_) => {
                    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
                    let slope = -dot(&g, &g);
                    (neg_g, slope)
                }
            };

            // near a minimizer the Armijo decrease drops below the rounding
            // noise of the summed objective; allow that much slack once the
            // required decrease itself is sub-noise, or the search would
            // reject steps it cannot resolve
            let noise = 1e-12 * (1.0 + value.abs());
            let mut t = 1.0;
            let mut accepted = None;
            while t >= MIN_STEP {
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(x, s)| x + t * s).collect();
                let cand_value = risk.value(&cand);
                let required = ARMIJO_C * t * slope;
                let bound = if required.abs() <= noise {
                    value + noise
                } else {
                    value + required
                };
                if cand_value.is_finite() && cand_value <= bound {
                    accepted = Some((cand, cand_value));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((cand, cand_value)) => {
                    theta = cand;
                    value = cand_value;
                    lambda = (lambda * 0.5).max(1e-14);
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > MAX_DAMPING {
                        return Err(OptimError::LineSearchFailed {
                            iteration: iter,
                            damping: lambda,
                        });
                    }
                }
            }
        }
    }
    unreachable!("loop exits via return");
}

//! Binary linear classification with the smoothed hinge loss: synthetic data
//! generation, posterior classifiers (modal-class prediction and predictive
//! probability curves) and a ridge-penalized ERM baseline.

use rand::Rng;
use thiserror::Error;

use crate::bootstrap::PosteriorDraws;
use crate::data::{DataError, LabeledDataset, Standardization};
use crate::loss::SmoothHinge;
use crate::numkit::{dot, standard_normal, Matrix, RngStream, WeightVector};
use crate::optimize::{minimize_weighted_risk, OptimError, OptimOptions};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("prediction and truth have lengths {predictions} and {truth}")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Synthetic benchmark: `P(y = 1) = P(y = -1) = 1/2` and `z | y ~ N(y, 1)`.
/// The optimal rule is `sign(z)` with misclassification `Phi(-1)`.
pub fn gen_synthetic(n: usize, rng: &mut RngStream) -> LabeledDataset {
    assert!(n >= 1, "need at least one observation");
    let mut z = Matrix::zeros(n, 1);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        z[(i, 0)] = label + standard_normal(rng);
        y.push(label);
    }
    LabeledDataset::new(z, y).expect("generated labels are valid")
}

/// Posterior over `theta = (alpha, beta)` together with the covariate
/// standardization it was fit under (if any). Predictions standardize
/// incoming covariates with the stored train-set parameters.
#[derive(Debug, Clone)]
pub struct ClassifierPosterior {
    draws: PosteriorDraws,
    standardization: Option<Standardization>,
}

impl ClassifierPosterior {
    pub fn new(
        draws: PosteriorDraws,
        standardization: Option<Standardization>,
    ) -> Result<Self, ClassifyError> {
        if draws.dim() < 2 {
            return Err(ClassifyError::Invalid(
                "classifier draws need an intercept and at least one covariate".into(),
            ));
        }
        if let Some(s) = &standardization {
            if s.mean.len() != draws.dim() - 1 {
                return Err(ClassifyError::Invalid(format!(
                    "standardization covers {} covariates, draws have {}",
                    s.mean.len(),
                    draws.dim() - 1
                )));
            }
        }
        Ok(ClassifierPosterior {
            draws,
            standardization,
        })
    }

    pub fn draws(&self) -> &PosteriorDraws {
        &self.draws
    }

    pub fn covariate_dim(&self) -> usize {
        self.draws.dim() - 1
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    fn score(&self, draw: &[f64], z_std: &[f64]) -> f64 {
        draw[0] + dot(&draw[1..], z_std)
    }

    fn standardized(&self, z: &[f64]) -> Vec<f64> {
        match &self.standardization {
            Some(s) => s.apply(z),
            None => z.to_vec(),
        }
    }

    /// Modal-class prediction: per draw `sign(alpha + beta . z)` with
    /// `sign(0) = +1`, then the majority label (exact ties go to `+1`).
    pub fn predict_modal(&self, z_star: &[f64]) -> f64 {
        let z = self.standardized(z_star);
        let mut positive = 0usize;
        for j in 0..self.draws.num_draws() {
            if self.score(self.draws.draw(j), &z) >= 0.0 {
                positive += 1;
            }
        }
        if 2 * positive >= self.draws.num_draws() {
            1.0
        } else {
            -1.0
        }
    }

    /// Fraction of draws with `alpha + beta . z > 0`.
    pub fn predictive_prob(&self, z_star: &[f64]) -> f64 {
        let z = self.standardized(z_star);
        let positive = (0..self.draws.num_draws())
            .filter(|&j| self.score(self.draws.draw(j), &z) > 0.0)
            .count();
        positive as f64 / self.draws.num_draws() as f64
    }

    pub fn predictive_probs(&self, z_grid: &[Vec<f64>]) -> Vec<f64> {
        z_grid.iter().map(|z| self.predictive_prob(z)).collect()
    }

    pub fn predict_many(&self, data: &LabeledDataset) -> Vec<f64> {
        (0..data.n())
            .map(|i| self.predict_modal(data.covariate_row(i)))
            .collect()
    }

    /// Draw `j` expressed on the raw covariate scale (undoing the stored
    /// standardization).
    pub fn raw_coefficients(&self, j: usize) -> Vec<f64> {
        let draw = self.draws.draw(j);
        match &self.standardization {
            None => draw.to_vec(),
            Some(s) => {
                let mut out = Vec::with_capacity(draw.len());
                let mut alpha = draw[0];
                for (k, b) in draw[1..].iter().enumerate() {
                    alpha -= b * s.mean[k] / s.sd[k];
                }
                out.push(alpha);
                for (k, b) in draw[1..].iter().enumerate() {
                    out.push(b / s.sd[k]);
                }
                out
            }
        }
    }
}

/// Fraction of mismatched labels.
pub fn misclass_rate(predictions: &[f64], truth: &[f64]) -> Result<f64, ClassifyError> {
    if predictions.len() != truth.len() || predictions.is_empty() {
        return Err(ClassifyError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let wrong = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p != t)
        .count();
    Ok(wrong as f64 / predictions.len() as f64)
}

/// Ridge-penalized smooth-hinge empirical risk minimizer: minimizes the mean
/// smooth-hinge loss plus `(ridge/2) |beta|^2` with the intercept
/// unpenalized. Returns `(alpha, beta)`.
pub fn baseline_erm(
    data: &LabeledDataset,
    ridge: f64,
    optim: &OptimOptions,
) -> Result<(f64, Vec<f64>), ClassifyError> {
    if !ridge.is_finite() || ridge <= 0.0 {
        return Err(ClassifyError::Invalid(format!(
            "baseline ridge must be positive, got {ridge}"
        )));
    }
    let loss = SmoothHinge::new(data.covariate_dim())
        .map_err(|e| ClassifyError::Invalid(e.to_string()))?;
    let packed = data.to_dataset();
    let opts = OptimOptions {
        ridge,
        ridge_skip: 1,
        ..optim.clone()
    };
    let weights = WeightVector::uniform(packed.n()).map_err(|e| ClassifyError::Invalid(e.to_string()))?;
    let init = vec![0.0; data.covariate_dim() + 1];
    let (theta, _) = minimize_weighted_risk(&loss, &packed, &weights, &init, &opts)?;
    Ok((theta[0], theta[1..].to_vec()))
}

/// `z` value at which a 1-D predictive-probability curve crosses `level`,
/// linearly interpolated between grid points; `None` if it never crosses.
pub fn crossing_point(z_grid: &[f64], probs: &[f64], level: f64) -> Option<f64> {
    debug_assert_eq!(z_grid.len(), probs.len());
    for k in 1..probs.len() {
        let (p0, p1) = (probs[k - 1], probs[k]);
        if (p0 - level) * (p1 - level) <= 0.0 && p0 != p1 {
            let t = (level - p0) / (p1 - p0);
            return Some(z_grid[k - 1] + t * (z_grid[k] - z_grid[k - 1]));
        }
    }
    None
}

//! Loss-scale calibration: empirical information matrices, the sandwich
//! covariance, and the plug-in loss scale
//! `w = tr(J I^{-1} J^T) / tr(J)` that equates the asymptotic Fisher
//! information numbers of the general-Bayes posterior and the
//! loss-likelihood bootstrap.

use serde::Serialize;
use thiserror::Error;

use crate::data::Dataset;
use crate::loss::LossModel;
use crate::numkit::{Cholesky, Matrix, NumError, SpdMatrix, WeightVector};
use crate::optimize::{minimize_weighted_risk, OptimError, OptimOptions};

/// Relative pivot floor, as a fraction of the largest diagonal entry, below
/// which `I_n` is treated as singular rather than silently regularized.
pub const INFO_PIVOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("I_n is singular or near-singular (Cholesky pivot {pivot}); calibration needs more data, a different loss, or a ridge-penalized fit")]
    SingularInformation { pivot: usize },
    #[error("J_n is singular (Cholesky pivot {pivot}); the sandwich covariance is undefined here")]
    SingularCurvature { pivot: usize },
    #[error("tr(J_n) = {trace:.3e} is not positive: theta sits where the loss has no curvature (separable data reaches the flat zero-risk region); a ridge penalty on the fit gives a usable theta_hat")]
    NonPositiveCurvatureTrace { trace: f64 },
    #[error("empirical risk minimization failed: {0}")]
    Optim(#[from] OptimError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// The calibration bundle at the empirical risk minimizer: information
/// matrices, sandwich covariance (the asymptotic covariance of
/// `sqrt(n) (theta_tilde - theta_hat)`) and loss scale.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub theta_hat: Vec<f64>,
    pub i_n: Matrix,
    pub j_n: Matrix,
    pub sandwich: Matrix,
    pub w_hat: f64,
    pub n: usize,
}

/// Empirical information matrices at `theta`:
/// `I_n = (1/n) sum grad grad^T` and `J_n = (1/n) sum hess`.
pub fn empirical_information<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    theta: &[f64],
) -> Result<(Matrix, Matrix), CalibrateError> {
    if theta.len() != loss.param_dim() {
        return Err(CalibrateError::DimensionMismatch(format!(
            "theta has length {}, loss expects {}",
            theta.len(),
            loss.param_dim()
        )));
    }
    if data.obs_dim() != loss.obs_dim() {
        return Err(CalibrateError::DimensionMismatch(format!(
            "observation dim {} does not match loss obs dim {}",
            data.obs_dim(),
            loss.obs_dim()
        )));
    }
    let d = loss.param_dim();
    let mut i_n = Matrix::zeros(d, d);
    let mut j_n = Matrix::zeros(d, d);
    let mut g = vec![0.0; d];
    let mut h = Matrix::zeros(d, d);
    for x in data.iter_rows() {
        loss.grad_into(theta, x, &mut g);
        i_n.add_outer(&g, 1.0);
        loss.hess_into(theta, x, &mut h);
        j_n.add_assign_scaled(&h, 1.0);
    }
    let inv_n = 1.0 / data.n() as f64;
    Ok((i_n.scaled(inv_n), j_n.scaled(inv_n).symmetrized()))
}

/// Sandwich covariance `J_n^{-1} I_n J_n^{-1}`.
pub fn sandwich_covariance(i_n: &Matrix, j_n: &Matrix) -> Result<Matrix, CalibrateError> {
    let j_chol = Cholesky::factor(j_n).map_err(|e| match e {
        NumError::NotPositiveDefinite { pivot } => CalibrateError::SingularCurvature { pivot },
        other => CalibrateError::Num(other),
    })?;
    let j_inv = j_chol.inverse();
    Ok(j_inv.matmul(i_n).matmul(&j_inv).symmetrized())
}

/// Inverts `I_n` with the near-singularity floor.
fn invert_information(i_n: &Matrix) -> Result<Matrix, CalibrateError> {
    let max_diag = (0..i_n.rows())
        .map(|k| i_n[(k, k)])
        .fold(0.0f64, f64::max);
    let floor = INFO_PIVOT_FLOOR * max_diag;
    let chol = Cholesky::factor_with_floor(i_n, floor).map_err(|e| match e {
        NumError::NotPositiveDefinite { pivot } => CalibrateError::SingularInformation { pivot },
        other => CalibrateError::Num(other),
    })?;
    Ok(chol.inverse())
}

/// Plug-in loss scale from precomputed information matrices.
pub fn w_hat_from(i_n: &Matrix, j_n: &Matrix) -> Result<f64, CalibrateError> {
    let tr_j = j_n.trace();
    if tr_j <= 0.0 {
        return Err(CalibrateError::NonPositiveCurvatureTrace { trace: tr_j });
    }
    let i_inv = invert_information(i_n)?;
    let num = j_n.matmul(&i_inv).matmul(&j_n.transpose()).trace();
    Ok(num / tr_j)
}

/// Plug-in loss scale `w = tr(J_n I_n^{-1} J_n^T) / tr(J_n)` evaluated at the
/// empirical risk minimizer `theta_hat`.
pub fn w_hat<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    theta_hat: &[f64],
) -> Result<f64, CalibrateError> {
    let (i_n, j_n) = empirical_information(loss, data, theta_hat)?;
    w_hat_from(&i_n, &j_n)
}

/// Closed-form loss scale for the quadratic loss under known data covariance:
/// `w = tr(Sigma0^{-1}) / tr(Sigma1^{-1})`.
pub fn w_quadratic_closed_form(sigma0: &SpdMatrix, sigma1: &SpdMatrix) -> f64 {
    sigma0.inverse().trace() / sigma1.inverse().trace()
}

/// Fits the uniform-weight empirical risk minimizer and assembles the full
/// calibration bundle.
pub fn calibration_report<L: LossModel + ?Sized>(
    loss: &L,
    data: &Dataset,
    optim: &OptimOptions,
) -> Result<CalibrationReport, CalibrateError> {
    let weights = WeightVector::uniform(data.n())?;
    let (theta_hat, _) =
        minimize_weighted_risk(loss, data, &weights, &loss.default_init(data), optim)?;
    let (i_n, j_n) = empirical_information(loss, data, &theta_hat)?;
    let w_hat = w_hat_from(&i_n, &j_n)?;
    let sandwich = sandwich_covariance(&i_n, &j_n)?;
    Ok(CalibrationReport {
        theta_hat,
        i_n,
        j_n,
        sandwich,
        w_hat,
        n: data.n(),
    })
}

//! Loss models: the evaluator contract and the three concrete losses
//! (quadratic, scaled normal negative log-likelihood, smoothed hinge), each
//! with analytic gradient and Hessian in the parameter.

use thiserror::Error;

use crate::data::Dataset;
use crate::numkit::{dot, Matrix, NumError, SpdMatrix};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid loss specification: {0}")]
    Invalid(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Evaluator contract for a loss `l(theta, x)` with analytic derivatives in
/// `theta`.
///
/// Observations are rows of a [`Dataset`]; classification losses interpret a
/// row as `(y, z_1..z_p)` with the label first. Evaluators are immutable and
/// safe to share across threads.
pub trait LossModel: Sync {
    /// Parameter dimension `d`.
    fn param_dim(&self) -> usize;

    /// Expected observation row length.
    fn obs_dim(&self) -> usize;

    fn value(&self, theta: &[f64], x: &[f64]) -> f64;

    /// Writes the gradient of `value` with respect to `theta` into `out`.
    fn grad_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Writes the Hessian of `value` with respect to `theta` into `out`
    /// (overwriting it). The result is symmetric by construction.
    fn hess_into(&self, theta: &[f64], x: &[f64], out: &mut Matrix);

    fn grad(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.param_dim()];
        self.grad_into(theta, x, &mut g);
        g
    }

    fn hess(&self, theta: &[f64], x: &[f64]) -> Matrix {
        let mut h = Matrix::zeros(self.param_dim(), self.param_dim());
        self.hess_into(theta, x, &mut h);
        h
    }

    /// Starting point for risk minimization on `data`: zero unless the model
    /// knows better.
    fn default_init(&self, data: &Dataset) -> Vec<f64> {
        let _ = data;
        vec![0.0; self.param_dim()]
    }
}

fn check_dims(model: &(impl LossModel + ?Sized), theta: &[f64], x: &[f64]) {
    assert_eq!(
        theta.len(),
        model.param_dim(),
        "theta has length {}, loss expects {}",
        theta.len(),
        model.param_dim()
    );
    assert_eq!(
        x.len(),
        model.obs_dim(),
        "observation has length {}, loss expects {}",
        x.len(),
        model.obs_dim()
    );
}

/// Quadratic loss `l(theta, x) = (x - theta)^T Sigma1^{-1} (x - theta) / 2`.
///
/// The minimizer of its expectation is the population mean regardless of
/// `Sigma1`.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    sigma1: SpdMatrix,
    sigma1_inv: Matrix,
}

impl QuadraticLoss {
    pub fn new(sigma1: SpdMatrix) -> Self {
        let sigma1_inv = sigma1.cholesky().inverse();
        QuadraticLoss { sigma1, sigma1_inv }
    }

    /// Standard quadratic loss (`Sigma1 = I`).
    pub fn standard(dim: usize) -> Self {
        QuadraticLoss::new(SpdMatrix::identity(dim))
    }

    pub fn sigma1(&self) -> &SpdMatrix {
        &self.sigma1
    }

    fn residual(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        x.iter().zip(theta).map(|(xi, ti)| xi - ti).collect()
    }
}

impl LossModel for QuadraticLoss {
    fn param_dim(&self) -> usize {
        self.sigma1.dim()
    }

    fn obs_dim(&self) -> usize {
        self.sigma1.dim()
    }

    fn value(&self, theta: &[f64], x: &[f64]) -> f64 {
        check_dims(self, theta, x);
        let r = self.residual(theta, x);
        0.5 * dot(&r, &self.sigma1_inv.mul_vec(&r))
    }

    fn grad_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        check_dims(self, theta, x);
        let r = self.residual(theta, x);
        let sr = self.sigma1_inv.mul_vec(&r);
        for (o, v) in out.iter_mut().zip(&sr) {
            *o = -v;
        }
    }

    fn hess_into(&self, _theta: &[f64], _x: &[f64], out: &mut Matrix) {
        out.clone_from(&self.sigma1_inv);
    }

    fn default_init(&self, data: &Dataset) -> Vec<f64> {
        data.mean()
    }
}

/// Self-information loss of a normal family with known covariance, up to the
/// additive log-normalizer (dropped: it does not depend on `theta`), times a
/// positive scale `c`:
///
/// `l(theta, x) = c * (x - theta)^T Sigma^{-1} (x - theta) / 2`.
///
/// Data drawn from the family itself then satisfy
/// `f0 = exp(-w0 * l(theta0, .))` with `w0 = 1/c`, so the calibrated loss
/// scale should recover `1/c`.
#[derive(Debug, Clone)]
pub struct NormalNll {
    quadratic: QuadraticLoss,
    scale: f64,
}

impl NormalNll {
    pub fn new(sigma: SpdMatrix, scale: f64) -> Result<Self, LossError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LossError::Invalid(format!("scale c must be positive, got {scale}")));
        }
        Ok(NormalNll {
            quadratic: QuadraticLoss::new(sigma),
            scale,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sigma(&self) -> &SpdMatrix {
        self.quadratic.sigma1()
    }
}

impl LossModel for NormalNll {
    fn param_dim(&self) -> usize {
        self.quadratic.param_dim()
    }

    fn obs_dim(&self) -> usize {
        self.quadratic.obs_dim()
    }

    fn value(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.scale * self.quadratic.value(theta, x)
    }

    fn grad_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        self.quadratic.grad_into(theta, x, out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }

    fn hess_into(&self, theta: &[f64], x: &[f64], out: &mut Matrix) {
        self.quadratic.hess_into(theta, x, out);
        *out = out.scaled(self.scale);
    }

    fn default_init(&self, data: &Dataset) -> Vec<f64> {
        data.mean()
    }
}

/// Piecewise evaluation of the smoothed hinge `phi_2` and its first two
/// derivatives:
///
/// ```text
/// phi_2(xi) = 1/2 - xi                                   if xi < 0
///           = xi^6 - 3 xi^5 + (5/2) xi^4 - xi + 1/2      if 0 <= xi <= 1
///           = 0                                          otherwise
/// ```
///
/// The value and first three derivatives of the middle polynomial match the
/// outer branches at both knots, so `xi = 0` and `xi = 1` evaluate the
/// polynomial branch without ambiguity.
pub fn phi2(xi: f64) -> (f64, f64, f64) {
    if xi < 0.0 {
        (0.5 - xi, -1.0, 0.0)
    } else if xi <= 1.0 {
        let x2 = xi * xi;
        let x3 = x2 * xi;
        let x4 = x2 * x2;
        let x5 = x4 * xi;
        let value = x5 * xi - 3.0 * x5 + 2.5 * x4 - xi + 0.5;
        let first = 6.0 * x5 - 15.0 * x4 + 10.0 * x3 - 1.0;
        let second = 30.0 * x4 - 60.0 * x3 + 30.0 * x2;
        (value, first, second)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// Smoothed hinge loss for linear binary classification.
///
/// Observations are `(y, z)` rows with `y` in `{-1, +1}`; the parameter is
/// `theta = (alpha, beta_1..beta_p)` with the intercept first, and the loss
/// is `phi_2(y * (alpha + beta . z))`.
#[derive(Debug, Clone)]
pub struct SmoothHinge {
    covariate_dim: usize,
}

impl SmoothHinge {
    pub fn new(covariate_dim: usize) -> Result<Self, LossError> {
        if covariate_dim == 0 {
            return Err(LossError::Invalid("need at least one covariate".into()));
        }
        Ok(SmoothHinge { covariate_dim })
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn margin(&self, theta: &[f64], x: &[f64]) -> f64 {
        let y = x[0];
        let z = &x[1..];
        y * (theta[0] + dot(&theta[1..], z))
    }
}

impl LossModel for SmoothHinge {
    fn param_dim(&self) -> usize {
        self.covariate_dim + 1
    }

    fn obs_dim(&self) -> usize {
        self.covariate_dim + 1
    }

    fn value(&self, theta: &[f64], x: &[f64]) -> f64 {
        check_dims(self, theta, x);
        phi2(self.margin(theta, x)).0
    }

    fn grad_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        check_dims(self, theta, x);
        let y = x[0];
        let (_, first, _) = phi2(self.margin(theta, x));
        let c = first * y;
        out[0] = c;
        for (o, z) in out[1..].iter_mut().zip(&x[1..]) {
            *o = c * z;
        }
    }

    fn hess_into(&self, theta: &[f64], x: &[f64], out: &mut Matrix) {
        check_dims(self, theta, x);
        let (_, _, second) = phi2(self.margin(theta, x));
        out.fill(0.0);
        if second == 0.0 {
            return;
        }
        // u = (1, z); y^2 = 1 drops out of u u^T.
        let d = self.param_dim();
        let mut u = Vec::with_capacity(d);
        u.push(1.0);
        u.extend_from_slice(&x[1..]);
        out.add_outer(&u, second);
    }
}

/// `c * l` for a positive constant `c`; used by rescaling-invariance checks
/// and sensitivity studies.
#[derive(Debug, Clone)]
pub struct ScaledLoss<L> {
    inner: L,
    c: f64,
}

impl<L: LossModel> ScaledLoss<L> {
    pub fn new(inner: L, c: f64) -> Result<Self, LossError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(LossError::Invalid(format!("scale must be positive, got {c}")));
        }
        Ok(ScaledLoss { inner, c })
    }

    pub fn scale(&self) -> f64 {
        self.c
    }
}

impl<L: LossModel> LossModel for ScaledLoss<L> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn value(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.c * self.inner.value(theta, x)
    }

    fn grad_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        self.inner.grad_into(theta, x, out);
        for v in out.iter_mut() {
            *v *= self.c;
        }
    }

    fn hess_into(&self, theta: &[f64], x: &[f64], out: &mut Matrix) {
        self.inner.hess_into(theta, x, out);
        *out = out.scaled(self.c);
    }

    fn default_init(&self, data: &Dataset) -> Vec<f64> {
        self.inner.default_init(data)
    }
}

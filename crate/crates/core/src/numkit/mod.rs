//! Dense SPD matrix algebra and reproducible random sampling.

mod matrix;
mod rng;

use thiserror::Error;

pub use matrix::{
    compensated_sum, dot, inf_norm, l2_norm, spd_inverse, Cholesky, Matrix, SpdMatrix,
    SYMMETRY_TOL,
};
pub use rng::{
    derive_seed, dirichlet_uniform, mvn_sample, standard_normal, RngStream, WeightVector,
    STREAM_DATA, STREAM_MCMC, STREAM_TEST_SPLIT,
};

#[derive(Debug, Error)]
pub enum NumError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} exceeds {tol:.1e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("matrix is not positive definite: non-positive Cholesky pivot at index {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

//! Posterior inference for loss-defined parameters.
//!
//! A parameter is defined as the minimizer of an expected loss under the
//! unknown sampling distribution. This crate draws posterior samples for such
//! parameters three ways and ties them together:
//!
//! - [`bootstrap`]: the loss-likelihood bootstrap (Dirichlet-weighted risk
//!   minimization per replicate), its weighted-likelihood special case and
//!   the plain Bayesian bootstrap over functionals;
//! - [`calibrate`]: empirical information matrices, the sandwich covariance
//!   and the loss-scale estimate that matches the general-Bayes posterior's
//!   asymptotic Fisher information number to the bootstrap's;
//! - [`gb`]: the general-Bayes posterior (prior times exponentiated negative
//!   scaled loss), sampled with adaptive random-walk Metropolis, plus an
//!   exact conjugate oracle for the quadratic loss;
//! - [`classify`]: the smoothed-hinge binary classification pipeline with
//!   modal-class prediction and predictive-probability curves.
//!
//! [`numkit`], [`data`], [`loss`] and [`optimize`] supply the numeric kernel,
//! dataset handling, loss models and the weighted risk minimizer they all
//! share.

pub mod bootstrap;
pub mod calibrate;
pub mod classify;
pub mod data;
pub mod gb;
pub mod loss;
pub mod numkit;
pub mod optimize;

pub use data::{DataError, Dataset, LabeledDataset, Standardization};
pub use loss::{LossModel, NormalNll, QuadraticLoss, ScaledLoss, SmoothHinge};
pub use numkit::{Matrix, NumError, RngStream, SpdMatrix, WeightVector};

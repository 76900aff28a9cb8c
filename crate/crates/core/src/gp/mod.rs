//! Gaussian-process regression with an anisotropic squared-exponential
//! kernel.
//!
//! Each output dimension is an independent scalar GP. All outputs share the
//! kernel (signal variance and lengthscales) and the training inputs, so the
//! kernel matrix `K` is formed once; every output keeps its own noise
//! variance and therefore its own factorization of `K + σ_i² I`.

mod kernel;
mod likelihood;
mod model;
mod optimize;

pub use kernel::{covariance_matrix, cross_covariance, kernel_se, Hyperparameters};
pub use likelihood::{log_marginal_likelihood, LogLikelihood};
pub use model::{Dataset, TrainedGP, JITTER_MAX, JITTER_START};
pub use optimize::{optimize_hyperparameters, OptimizerSettings, ParameterBounds};

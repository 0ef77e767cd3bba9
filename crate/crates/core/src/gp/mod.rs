//! Gaussian-process machinery: kernels, exact regression, hyperparameter
//! fitting, support-point selection and batch projection.

mod hyper;
mod kernel;
mod project;
mod regress;
mod support;

pub use hyper::{fit_hyperparams, fit_kernel, heuristic_params, hyper_bounds, HyperBounds, HyperFit, HyperFitConfig, MIN_FIT_POINTS};
pub use kernel::{cross_cov, gram, kernel_eval, KernelParams, JITTER_RATIO};
pub use project::{project_batch, project_batch_centered, PooledMean, ProjectedBatch};
pub use regress::{gp_predict, noisy_gram, GpPrediction, GpRegressor};
pub use support::{select_support_points, ActionData, PreparedBatch, SupportSelection, SupportSet};

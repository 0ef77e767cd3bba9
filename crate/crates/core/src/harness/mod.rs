//! End-to-end experiments: data collection, fitting, and the regression and
//! control evaluations, with reproducible CSV output.

mod config;
mod data;
mod fit;
mod metrics;
mod regression;
mod control;
mod inspect;

pub use config::{stage_rng, ControlConfig, DataConfig, ExperimentConfig, FitConfig, RegressionConfig, Stage};
pub use data::{collect_training_data, gen_data, load_batches, sarsa_trajectories, training_batches, Manifest, ManifestEntry};
pub use fit::{fit, fit_batches, fit_kernels, write_weight_table, FitOutput};
pub use metrics::{correlation, mean_ci, median, MetricWriter};
pub use regression::{eval_regression, evaluate_regression, RegressionReport, RunScores, SettingScores, IBP, METHODS};
pub use control::{
    episodes_to_threshold, eval_control, evaluate_control, threshold_for, ControlReport, ControlRun, AGENTS,
    AVERAGE_MODEL, HIPMDP, TRUE_MODEL,
};
pub use inspect::{describe_model, filter_demo};

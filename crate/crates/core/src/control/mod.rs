//! Sarsa(0) with a Fourier cosine basis, and the loop that interleaves
//! planning on a learned model with acting in the real task.

mod fourier;
mod plan;
mod sarsa;

pub use fourier::{fourier_features, FourierValueFn};
pub use plan::{plan_then_act, plan_with_fixed_weights, plan_with_true_model, PlanConfig, PlanOutcome};
pub use sarsa::{
    run_episode, sarsa_run, Dynamics, EpisodeStats, ModelDynamics, RealDynamics, SarsaConfig, SarsaRun,
    DIVERGENCE_LIMIT,
};

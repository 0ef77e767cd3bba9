//! Blocked Gibbs sampling of the filter `z`, basis values `f(S*)`, instance
//! weights `w` and weight means `mu` from projected batches.
//!
//! Each chain starts from the baseline-only model whose basis is the pooled
//! posterior mean, so iteration 0 is the average model. Every sweep visits
//! all basis blocks, all instance weights, every row's filter entries and
//! birth/death proposals, then the weight means. The returned model is the
//! best-scoring state over all chains and iterations (see
//! [`joint_log_likelihood`]), with basis values at their conditional mean.

mod conditionals;
mod problem;
mod score;
mod state;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use conditionals::{
    basis_posterior, filter_log_odds, propose_new_features, sample_basis, sample_filter_existing,
    sample_weights, slice_weights_collapsed, update_weight_means, weight_mean_posterior, weight_posterior, GaussianMoments,
};
pub use problem::GibbsProblem;
pub use score::{ibp_log_prior, joint_log_likelihood, weight_log_prior};
pub use state::GibbsState;

use crate::error::{HipError, Result};
use crate::gp::SupportSet;
use crate::model::{LatentDynamicsModel, ModelParts, StateLayout};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub alpha: f64,
    pub sigma_w: f64,
    pub sigma_w0: f64,
    pub iterations: usize,
    /// Weight sets drawn per birth proposal.
    pub num_weight_samples: usize,
    pub chains: usize,
    pub seed: u64,
    /// Integrate every basis function of a row out of the filter and
    /// birth/death moves, instead of conditioning on the other features'
    /// current basis values.
    pub collapse_basis: bool,
    /// Drop all likelihood terms so the chain samples the prior. Test switch.
    #[serde(skip)]
    pub ignore_likelihood: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            alpha: 2.0,
            sigma_w: 4.0,
            sigma_w0: 4.0,
            iterations: 100,
            num_weight_samples: 20,
            chains: 3,
            seed: 0,
            collapse_basis: true,
            ignore_likelihood: false,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HipError::Config(format!("gibbs.{name} must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("sigma_w", self.sigma_w)?;
        positive("sigma_w0", self.sigma_w0)?;
        for (name, v) in [
            ("iterations", self.iterations),
            ("num_weight_samples", self.num_weight_samples),
            ("chains", self.chains),
        ] {
            if v == 0 {
                return Err(HipError::Config(format!("gibbs.{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Independent stream for one chain.
    pub fn chain_rng(&self, chain: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chain as u64);
        rng
    }
}

/// One line of the per-iteration trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub chain: usize,
    pub iteration: usize,
    pub num_features: usize,
    pub joint_loglik: f64,
}

#[derive(Clone, Debug)]
pub struct GibbsFit {
    pub model: LatentDynamicsModel,
    /// Chain and iteration the model was taken from.
    pub chain: usize,
    pub iteration: usize,
    pub joint_loglik: f64,
    /// Score of the shared starting state.
    pub initial_loglik: f64,
    /// Sampled weights of each training instance in the returned state,
    /// `w[b]` in batch order including the leading 1.
    pub instance_weights: Vec<Vec<f64>>,
    pub diagnostics: Vec<DiagnosticRow>,
}

/// Baseline-only state with the basis at its pooled posterior mean.
pub fn initial_state(problem: &GibbsProblem) -> GibbsState {
    let mut state = GibbsState::baseline(problem);
    conditionals::set_basis_to_mean(problem, &mut state);
    state
}

/// One full sweep over every block.
pub fn sweep<R: rand::Rng + ?Sized>(
    problem: &GibbsProblem,
    state: &mut GibbsState,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<()> {
    for row in 0..problem.num_rows() {
        sample_basis(problem, state, row, rng)?;
    }
    for b in 0..problem.num_instances() {
        sample_weights(problem, state, b, cfg.sigma_w, rng)?;
    }
    slice_weights_collapsed(problem, state, cfg, rng);
    for row in 0..problem.num_rows() {
        sample_basis(problem, state, row, rng)?;
    }
    for row in 0..problem.num_rows() {
        for k in 1..state.num_features() {
            if state.count_excluding(k, row) > 0 {
                sample_filter_existing(problem, state, k, row, cfg, rng)?;
            }
        }
        propose_new_features(problem, state, row, cfg, rng)?;
    }
    update_weight_means(state, cfg, rng);
    Ok(())
}

/// Model with the state's filters and weights and every basis vector at
/// its conditional posterior mean.
pub fn model_from_state(
    problem: &GibbsProblem,
    mut state: GibbsState,
    support: &SupportSet,
    layout: &StateLayout,
    cfg: &GibbsConfig,
) -> Result<LatentDynamicsModel> {
    conditionals::set_basis_to_mean(problem, &mut state);
    let kf = state.num_features();
    let f = (0..kf)
        .map(|k| (0..problem.num_rows()).map(|row| state.basis(problem, k, row)).collect())
        .collect();
    let weight_means = (1..kf)
        .map(|k| weight_mean_posterior(&state.feature_weights(k), cfg.sigma_w, cfg.sigma_w0))
        .collect();
    let parts = ModelParts {
        layout: layout.clone(),
        support: support.clone(),
        z: state.z.clone(),
        f,
        weight_means,
        sigma_w: cfg.sigma_w,
        sigma_w0: cfg.sigma_w0,
    };
    LatentDynamicsModel::new(parts.prune())
}

fn check_support(problem: &GibbsProblem, support: &SupportSet, layout: &StateLayout) -> Result<()> {
    if support.num_rows() != problem.num_rows() || support.len() != problem.support_len() {
        return Err(HipError::invalid("support set does not match the projected batches"));
    }
    if layout.dim() != support.dim {
        return Err(HipError::invalid("state layout dimension differs from support"));
    }
    Ok(())
}

/// The pooled baseline-only model: the sampler's starting point.
pub fn average_model(
    problem: &GibbsProblem,
    support: &SupportSet,
    layout: &StateLayout,
    cfg: &GibbsConfig,
) -> Result<LatentDynamicsModel> {
    check_support(problem, support, layout)?;
    model_from_state(problem, initial_state(problem), support, layout, cfg)
}

pub fn run_gibbs(
    problem: &GibbsProblem,
    support: &SupportSet,
    layout: &StateLayout,
    cfg: &GibbsConfig,
) -> Result<GibbsFit> {
    cfg.validate()?;
    check_support(problem, support, layout)?;
    let start = initial_state(problem);
    let initial_loglik = joint_log_likelihood(problem, &start, cfg);
    let mut diagnostics = Vec::with_capacity(cfg.chains * (cfg.iterations + 1));
    let mut best = (initial_loglik, 0usize, 0usize, start.clone());
    for chain in 0..cfg.chains {
        let mut rng = cfg.chain_rng(chain);
        let mut state = start.clone();
        diagnostics.push(DiagnosticRow {
            chain,
            iteration: 0,
            num_features: 1,
            joint_loglik: initial_loglik,
        });
        for it in 1..=cfg.iterations {
            sweep(problem, &mut state, cfg, &mut rng)?;
            let score = joint_log_likelihood(problem, &state, cfg);
            if !score.is_finite() {
                return Err(HipError::numerical(format!(
                    "joint log-likelihood became {score} in chain {chain}, iteration {it}"
                )));
            }
            log::debug!("chain {chain} iteration {it}: K={} loglik={score:.3}", state.num_features());
            diagnostics.push(DiagnosticRow {
                chain,
                iteration: it,
                num_features: state.num_features(),
                joint_loglik: score,
            });
            if score > best.0 {
                best = (score, chain, it, state.clone());
            }
        }
        log::info!("chain {chain} finished with K={}", state.num_features());
    }
    let (joint_loglik, chain, iteration, state) = best;
    let instance_weights = state.w.clone();
    let model = model_from_state(problem, state, support, layout, cfg)?;
    Ok(GibbsFit {
        model,
        chain,
        iteration,
        joint_loglik,
        initial_loglik,
        instance_weights,
        diagnostics,
    })
}

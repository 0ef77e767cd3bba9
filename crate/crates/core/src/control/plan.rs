use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::sarsa::{run_episode, Dynamics, ModelDynamics, RealDynamics, SarsaConfig};
use super::FourierValueFn;
use crate::env::Environment;
use crate::error::{HipError, Result};
use crate::filter::{mean_weights, WeightBelief};
use crate::model::{InstanceWeights, LatentDynamicsModel, TransitionTuple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Simulated episodes before the first real one.
    pub initial_episodes: usize,
    /// Simulated episodes before each real one.
    pub planning_episodes: usize,
    pub real_episodes: usize,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            initial_episodes: 20,
            planning_episodes: 5,
            real_episodes: 20,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.real_episodes == 0 {
            return Err(HipError::Config("control.real_episodes must be positive".into()));
        }
        Ok(())
    }
}

/// Returns of the real episodes, in order.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub returns: Vec<f64>,
    pub steps: Vec<usize>,
    /// Actions taken in each real episode.
    pub actions: Vec<Vec<usize>>,
    /// Filtered belief after the last episode; absent for fixed-weight agents.
    pub belief: Option<WeightBelief>,
}

enum Planner<'a> {
    Exact,
    Model(&'a LatentDynamicsModel),
}

fn interleave<E: Environment + ?Sized>(
    planner: Planner<'_>,
    env: &E,
    vf: &mut FourierValueFn,
    sarsa: &SarsaConfig,
    cfg: &PlanConfig,
    rng: &mut dyn RngCore,
    weights: &mut dyn FnMut() -> Result<InstanceWeights>,
    observe: &mut dyn FnMut(&TransitionTuple) -> Result<()>,
) -> Result<PlanOutcome> {
    sarsa.validate()?;
    cfg.validate()?;
    let mut episode = 0usize;
    let mut simulate = |n: usize, vf: &mut FourierValueFn, rng: &mut dyn RngCore, w: InstanceWeights| -> Result<()> {
        let mut dynamics: Box<dyn Dynamics + '_> = match planner {
            Planner::Exact => Box::new(RealDynamics(env)),
            Planner::Model(model) => Box::new(ModelDynamics {
                model,
                weights: w,
                task: env,
            }),
        };
        for _ in 0..n {
            run_episode(dynamics.as_mut(), vf, sarsa, true, episode, rng, &mut |_, _, _| Ok(()))?;
            episode += 1;
        }
        Ok(())
    };
    simulate(cfg.initial_episodes, vf, rng, weights()?)?;
    let mut out = PlanOutcome {
        returns: Vec::new(),
        steps: Vec::new(),
        actions: Vec::new(),
        belief: None,
    };
    for _ in 0..cfg.real_episodes {
        simulate(cfg.planning_episodes, vf, rng, weights()?)?;
        let mut actions = Vec::new();
        let mut real = RealDynamics(env);
        let stats = run_episode(&mut real, vf, sarsa, true, 0, rng, &mut |_, t, _| {
            actions.push(t.a);
            observe(t)
        })?;
        out.returns.push(stats.ret);
        out.steps.push(stats.steps);
        out.actions.push(actions);
    }
    Ok(out)
}

/// Plan on the model at the belief's mean weights, act in `env`, and filter
/// the weights from every real transition. The policy sees the refreshed
/// weights at the start of each episode.
pub fn plan_then_act<E: Environment + ?Sized>(
    model: &LatentDynamicsModel,
    belief: WeightBelief,
    env: &E,
    vf: &mut FourierValueFn,
    sarsa: &SarsaConfig,
    cfg: &PlanConfig,
    rng: &mut dyn RngCore,
) -> Result<PlanOutcome> {
    let belief = std::cell::RefCell::new(belief);
    let mut out = interleave(
        Planner::Model(model),
        env,
        vf,
        sarsa,
        cfg,
        rng,
        &mut || mean_weights(&belief.borrow()),
        &mut |t| belief.borrow_mut().observe(model, t),
    )?;
    out.belief = Some(belief.into_inner());
    Ok(out)
}

/// Same loop with weights held fixed, e.g. the pooled average model.
pub fn plan_with_fixed_weights<E: Environment + ?Sized>(
    model: &LatentDynamicsModel,
    weights: &InstanceWeights,
    env: &E,
    vf: &mut FourierValueFn,
    sarsa: &SarsaConfig,
    cfg: &PlanConfig,
    rng: &mut dyn RngCore,
) -> Result<PlanOutcome> {
    interleave(
        Planner::Model(model),
        env,
        vf,
        sarsa,
        cfg,
        rng,
        &mut || Ok(weights.clone()),
        &mut |_| Ok(()),
    )
}

/// Same loop planning on the simulator itself.
pub fn plan_with_true_model<E: Environment + ?Sized>(
    env: &E,
    vf: &mut FourierValueFn,
    sarsa: &SarsaConfig,
    cfg: &PlanConfig,
    rng: &mut dyn RngCore,
) -> Result<PlanOutcome> {
    interleave(
        Planner::Exact,
        env,
        vf,
        sarsa,
        cfg,
        rng,
        &mut || Ok(InstanceWeights::baseline(0)),
        &mut |_| Ok(()),
    )
}

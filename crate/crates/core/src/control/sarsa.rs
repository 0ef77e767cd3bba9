use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::FourierValueFn;
use crate::env::{Domain, Environment, Step, TrajectoryRow};
use crate::error::{HipError, Result};
use crate::model::{InstanceWeights, LatentDynamicsModel, State, TransitionTuple};

/// Coefficient magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarsaConfig {
    pub gamma: f64,
    /// Base step size, divided by `||c||` per coefficient.
    pub learning_rate: f64,
    pub epsilon: f64,
    pub order: usize,
    pub episodes: usize,
    /// Episode cap; the environment's own cap when absent.
    pub max_steps: Option<usize>,
}

impl Default for SarsaConfig {
    fn default() -> Self {
        Self::cartpole()
    }
}

impl SarsaConfig {
    pub fn cartpole() -> Self {
        SarsaConfig {
            gamma: 0.99,
            learning_rate: 0.01,
            epsilon: 0.05,
            order: 3,
            episodes: 30,
            max_steps: None,
        }
    }

    /// Undiscounted and greedy; zero-initialised values are optimistic under
    /// -1 rewards, which drives exploration.
    pub fn acrobot() -> Self {
        SarsaConfig {
            gamma: 1.0,
            learning_rate: 0.001,
            epsilon: 0.0,
            order: 5,
            episodes: 30,
            max_steps: None,
        }
    }

    pub fn for_domain(domain: Domain) -> Self {
        match domain {
            Domain::Cartpole => Self::cartpole(),
            Domain::Acrobot => Self::acrobot(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(HipError::Config(format!("sarsa.gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(HipError::Config("sarsa.learning_rate must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(HipError::Config("sarsa.epsilon must lie in [0, 1]".into()));
        }
        if self.max_steps == Some(0) {
            return Err(HipError::Config("sarsa.max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Anything Sarsa can interact with.
pub trait Dynamics {
    fn num_actions(&self) -> usize;
    fn max_steps(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> State;
    fn step(&mut self, s: &[f64], a: usize, rng: &mut dyn RngCore) -> Result<Step>;
}

/// The ground-truth simulator.
pub struct RealDynamics<'a, E: Environment + ?Sized>(pub &'a E);

impl<E: Environment + ?Sized> Dynamics for RealDynamics<'_, E> {
    fn num_actions(&self) -> usize {
        self.0.num_actions()
    }

    fn max_steps(&self) -> usize {
        self.0.max_steps()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> State {
        self.0.reset(rng)
    }

    fn step(&mut self, s: &[f64], a: usize, _rng: &mut dyn RngCore) -> Result<Step> {
        self.0.step(s, a)
    }
}

/// Transitions sampled from a learned model at fixed weights; start states,
/// rewards and termination come from the task.
pub struct ModelDynamics<'a, E: Environment + ?Sized> {
    pub model: &'a LatentDynamicsModel,
    pub weights: InstanceWeights,
    pub task: &'a E,
}

impl<E: Environment + ?Sized> Dynamics for ModelDynamics<'_, E> {
    fn num_actions(&self) -> usize {
        self.model.num_actions()
    }

    fn max_steps(&self) -> usize {
        self.task.max_steps()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> State {
        self.task.reset(rng)
    }

    fn step(&mut self, s: &[f64], a: usize, rng: &mut dyn RngCore) -> Result<Step> {
        let s_next = self.task.constrain(self.model.simulate_step(&self.weights, s, a, rng)?);
        let (reward, done) = self.task.outcome(&s_next);
        Ok(Step { s_next, reward, done })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub ret: f64,
    pub steps: usize,
    /// Steps whose state fell outside the value function's bounds.
    pub clipped: usize,
}

fn select_action(vf: &FourierValueFn, phi: &nalgebra::DVector<f64>, eps: f64, rng: &mut dyn RngCore) -> usize {
    let n = vf.num_actions();
    if eps > 0.0 && rng.random::<f64>() < eps {
        return rng.random_range(0..n);
    }
    let q = vf.q_values(phi);
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..n).filter(|&a| q[a] == best).collect();
    match ties.len() {
        0 => rng.random_range(0..n),
        1 => ties[0],
        k => ties[rng.random_range(0..k)],
    }
}

/// One Sarsa(0) episode. `on_step` sees every transition with its time index.
/// Truncation at the step cap bootstraps; termination does not.
pub fn run_episode<D: Dynamics + ?Sized>(
    dynamics: &mut D,
    vf: &mut FourierValueFn,
    cfg: &SarsaConfig,
    learn: bool,
    episode: usize,
    rng: &mut dyn RngCore,
    on_step: &mut dyn FnMut(usize, &TransitionTuple, bool) -> Result<()>,
) -> Result<EpisodeStats> {
    if dynamics.num_actions() != vf.num_actions() {
        return Err(HipError::invalid("value function and dynamics disagree on the action count"));
    }
    let cap = cfg.max_steps.unwrap_or_else(|| dynamics.max_steps());
    let mut s = dynamics.reset(rng);
    let (mut phi, c0) = vf.features(&s);
    let mut stats = EpisodeStats {
        ret: 0.0,
        steps: 0,
        clipped: usize::from(c0),
    };
    let mut a = select_action(vf, &phi, cfg.epsilon, rng);
    for t in 0..cap {
        let step = dynamics.step(&s, a, rng)?;
        on_step(t, &TransitionTuple::new(s, a, step.s_next.clone(), step.reward), step.done)?;
        stats.ret += step.reward;
        stats.steps += 1;
        let next = if step.done {
            None
        } else {
            let (phi2, c) = vf.features(&step.s_next);
            stats.clipped += usize::from(c);
            let a2 = select_action(vf, &phi2, cfg.epsilon, rng);
            Some((phi2, a2))
        };
        if learn {
            let target = step.reward + next.as_ref().map_or(0.0, |(p, a2)| cfg.gamma * vf.q(p, *a2));
            let delta = target - vf.q(&phi, a);
            let update = phi.component_mul(vf.rate_scale()) * (cfg.learning_rate * delta);
            let w = vf.weights_mut(a);
            *w += update;
            let magnitude = w.amax();
            if !(magnitude <= DIVERGENCE_LIMIT) {
                return Err(HipError::Divergence { episode, magnitude });
            }
        }
        match next {
            None => break,
            Some((p, a2)) => {
                s = step.s_next;
                phi = p;
                a = a2;
            }
        }
    }
    Ok(stats)
}

/// Per-episode results of a Sarsa run, plus every transition it saw.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SarsaRun {
    pub returns: Vec<f64>,
    pub steps: Vec<usize>,
    pub clipped: usize,
    pub transitions: Vec<TrajectoryRow>,
}

pub fn sarsa_run<D: Dynamics + ?Sized>(
    dynamics: &mut D,
    vf: &mut FourierValueFn,
    cfg: &SarsaConfig,
    rng: &mut dyn RngCore,
) -> Result<SarsaRun> {
    cfg.validate()?;
    let mut run = SarsaRun::default();
    for episode in 0..cfg.episodes {
        let mut log = |t: usize, tuple: &TransitionTuple, done: bool| {
            run.transitions.push(TrajectoryRow {
                instance: 0,
                episode,
                t,
                s: tuple.s.clone(),
                action: tuple.a,
                reward: tuple.r,
                s_next: tuple.s_next.clone(),
                done,
            });
            Ok(())
        };
        let stats = run_episode(dynamics, vf, cfg, true, episode, rng, &mut log)?;
        run.returns.push(stats.ret);
        run.steps.push(stats.steps);
        run.clipped += stats.clipped;
    }
    Ok(run)
}

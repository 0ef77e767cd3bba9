use std::path::Path;

use super::config::{stage_rng, ExperimentConfig, Stage};
use super::metrics::{ensure_dir, mean_ci, median, MetricWriter};
use crate::control::{plan_then_act, plan_with_fixed_weights, plan_with_true_model, FourierValueFn, PlanOutcome};
use crate::env::Environment;
use crate::error::{HipError, Result};
use crate::filter::init_belief;
use crate::model::{InstanceWeights, LatentDynamicsModel};

pub const AGENTS: [&str; 3] = ["true_model", "average_model", "hipmdp"];
pub const TRUE_MODEL: usize = 0;
pub const AVERAGE_MODEL: usize = 1;
pub const HIPMDP: usize = 2;

/// One agent's real-episode returns on one (setting, trial).
#[derive(Clone, Debug)]
pub struct ControlRun {
    pub setting: usize,
    pub trial: usize,
    pub agent: usize,
    pub returns: Vec<f64>,
    pub steps: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ControlReport {
    pub settings: Vec<[f64; 2]>,
    pub runs: Vec<ControlRun>,
    /// Target return per setting.
    pub thresholds: Vec<f64>,
    pub real_episodes: usize,
}

/// Target return at `fraction` of `asymptote`. For negative returns (costs)
/// the target is the cost `asymptote / fraction`, so both signs mean
/// "within the same ratio of the asymptote".
pub fn threshold_for(asymptote: f64, fraction: f64) -> f64 {
    if asymptote >= 0.0 {
        fraction * asymptote
    } else {
        asymptote / fraction
    }
}

/// 1-based index of the first return at or above `threshold`;
/// `returns.len() + 1` when never reached.
pub fn episodes_to_threshold(returns: &[f64], threshold: f64) -> usize {
    returns.iter().position(|&r| r >= threshold).map_or(returns.len() + 1, |i| i + 1)
}

impl ControlReport {
    fn of_agent(&self, agent: usize) -> impl Iterator<Item = &ControlRun> {
        self.runs.iter().filter(move |r| r.agent == agent)
    }

    pub fn episodes_to_threshold(&self, agent: usize) -> Vec<usize> {
        self.of_agent(agent)
            .map(|r| episodes_to_threshold(&r.returns, self.thresholds[r.setting]))
            .collect()
    }

    pub fn median_episodes_to_threshold(&self, agent: usize) -> f64 {
        let v: Vec<f64> = self.episodes_to_threshold(agent).into_iter().map(|e| e as f64).collect();
        median(&v)
    }

    /// Mean return and half-width per episode across settings and trials.
    pub fn curve(&self, agent: usize) -> Vec<(f64, f64)> {
        (0..self.real_episodes)
            .map(|e| {
                let v: Vec<f64> = self.of_agent(agent).map(|r| r.returns[e]).collect();
                mean_ci(&v)
            })
            .collect()
    }
}

/// Every agent on every evaluation setting, `trials` times each, from
/// identical fresh value functions.
pub fn evaluate_control(
    cfg: &ExperimentConfig,
    model: &LatentDynamicsModel,
    average: &LatentDynamicsModel,
    seed: u64,
) -> Result<ControlReport> {
    let cc = &cfg.control;
    if cc.trials == 0 || cc.asymptote_episodes == 0 || cc.asymptote_episodes > cc.plan.real_episodes {
        return Err(HipError::Config(
            "control.trials must be positive and 0 < asymptote_episodes <= plan.real_episodes".into(),
        ));
    }
    if !(cc.threshold_fraction > 0.0 && cc.threshold_fraction <= 1.0) {
        return Err(HipError::Config("control.threshold_fraction must lie in (0, 1]".into()));
    }
    if average.num_features() != 1 {
        return Err(HipError::invalid(format!(
            "average model must have one feature, has {}",
            average.num_features()
        )));
    }
    let sarsa = cfg.sarsa();
    let settings = cfg.evaluation().to_vec();
    let mut runs = Vec::new();
    let mut thresholds = Vec::new();
    for (si, &setting) in settings.iter().enumerate() {
        let env = cfg.domain.make(setting)?;
        let mut asymptotes = Vec::new();
        for trial in 0..cc.trials {
            for agent in 0..AGENTS.len() {
                let index = ((si * cc.trials + trial) * AGENTS.len() + agent) as u64;
                let mut rng = stage_rng(seed, Stage::Control, index);
                let mut vf = FourierValueFn::new(sarsa.order, env.bounds(), env.num_actions())?;
                let out: PlanOutcome = match agent {
                    TRUE_MODEL => plan_with_true_model(&env, &mut vf, &sarsa, &cc.plan, &mut rng)?,
                    AVERAGE_MODEL => plan_with_fixed_weights(
                        average,
                        &InstanceWeights::baseline(si),
                        &env,
                        &mut vf,
                        &sarsa,
                        &cc.plan,
                        &mut rng,
                    )?,
                    _ => plan_then_act(model, init_belief(model), &env, &mut vf, &sarsa, &cc.plan, &mut rng)?,
                };
                if agent == TRUE_MODEL {
                    let tail = &out.returns[out.returns.len() - cc.asymptote_episodes..];
                    asymptotes.push(tail.iter().sum::<f64>() / tail.len() as f64);
                }
                log::debug!("setting {setting:?} trial {trial} {}: {:?}", AGENTS[agent], out.returns);
                runs.push(ControlRun {
                    setting: si,
                    trial,
                    agent,
                    returns: out.returns,
                    steps: out.steps,
                });
            }
        }
        let asymptote = asymptotes.iter().sum::<f64>() / asymptotes.len() as f64;
        thresholds.push(threshold_for(asymptote, cc.threshold_fraction));
        log::info!("setting {setting:?}: true-model asymptote {asymptote:.2}");
    }
    Ok(ControlReport {
        settings,
        runs,
        thresholds,
        real_episodes: cc.plan.real_episodes,
    })
}

/// Run the evaluation and write `learning_curves.csv`, `control_curve.csv`
/// and `control_summary.csv` into `dir`.
pub fn eval_control(
    cfg: &ExperimentConfig,
    model: &LatentDynamicsModel,
    average: &LatentDynamicsModel,
    seed: u64,
    dir: &Path,
) -> Result<ControlReport> {
    ensure_dir(dir)?;
    let report = evaluate_control(cfg, model, average, seed)?;
    let hash = cfg.hash();
    let names = cfg.domain.param_names();

    let mut w = MetricWriter::create(
        &dir.join("learning_curves.csv"),
        &hash,
        seed,
        &["trial", "instance_id", names[0], names[1], "episode", "return", "steps", "agent"],
    )?;
    for r in &report.runs {
        let s = report.settings[r.setting];
        for (e, (ret, steps)) in r.returns.iter().zip(&r.steps).enumerate() {
            w.row(&[
                r.trial.to_string(),
                r.setting.to_string(),
                s[0].to_string(),
                s[1].to_string(),
                (e + 1).to_string(),
                ret.to_string(),
                steps.to_string(),
                AGENTS[r.agent].to_string(),
            ])?;
        }
    }
    w.finish()?;

    let mut w = MetricWriter::create(
        &dir.join("control_curve.csv"),
        &hash,
        seed,
        &["agent", "episode", "mean_return", "ci95"],
    )?;
    for (a, name) in AGENTS.iter().enumerate() {
        for (e, (m, ci)) in report.curve(a).into_iter().enumerate() {
            w.row(&[name.to_string(), (e + 1).to_string(), m.to_string(), ci.to_string()])?;
        }
    }
    w.finish()?;

    let mut w = MetricWriter::create(
        &dir.join("control_summary.csv"),
        &hash,
        seed,
        &["agent", "median_episodes_to_threshold", "runs", "never_reached"],
    )?;
    for (a, name) in AGENTS.iter().enumerate() {
        let eps = report.episodes_to_threshold(a);
        let never = eps.iter().filter(|&&e| e > report.real_episodes).count();
        w.row(&[
            name.to_string(),
            report.median_episodes_to_threshold(a).to_string(),
            eps.len().to_string(),
            never.to_string(),
        ])?;
    }
    w.finish()?;
    Ok(report)
}

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::index::sample;

use super::config::{stage_rng, ExperimentConfig, Stage};
use super::data::sarsa_trajectories;
use super::metrics::{correlation, ensure_dir, mean_ci, MetricWriter};
use crate::error::{HipError, Result};
use crate::filter::{filter_update, init_belief, mean_weights};
use crate::gp::{GpRegressor, KernelParams};
use crate::model::{InstanceBatch, LatentDynamicsModel, State, StateLayout, TransitionTuple};

pub const METHODS: [&str; 4] = ["instance_only_gp", "pooled_gp", "pooled_plus_instance_gp", "ibp_gp"];
pub const IBP: usize = 3;
const INSTANCE_ONLY: usize = 0;

/// Scores of every method on one held-out draw.
#[derive(Clone, Debug)]
pub struct RunScores {
    /// `mse[method][d]`
    pub mse: Vec<Vec<f64>>,
    /// Per test point summed Gaussian log-likelihood, `loglik[method][i]`.
    pub loglik: Vec<Vec<f64>>,
    /// Filtered weights of the latent model, baseline included.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SettingScores {
    pub setting: [f64; 2],
    pub runs: Vec<RunScores>,
}

impl SettingScores {
    /// Mean and half-width of the MSE of `method` on dimension `d` across runs.
    pub fn mse(&self, method: usize, d: usize) -> (f64, f64) {
        let v: Vec<f64> = self.runs.iter().map(|r| r.mse[method][d]).collect();
        mean_ci(&v)
    }

    /// Latent model beats instance-only on `dims`, and instance-only is
    /// strictly worst on every dimension.
    pub fn ordering_holds(&self, dims: &[usize]) -> bool {
        let dim = self.runs.first().map_or(0, |r| r.mse[0].len());
        let ibp_better = dims.iter().all(|&d| self.mse(IBP, d).0 < self.mse(INSTANCE_ONLY, d).0);
        let worst = (0..dim).all(|d| {
            let io = self.mse(INSTANCE_ONLY, d).0;
            (0..METHODS.len()).filter(|&m| m != INSTANCE_ONLY).all(|m| self.mse(m, d).0 < io)
        });
        ibp_better && worst
    }
}

#[derive(Clone, Debug)]
pub struct RegressionReport {
    pub param_names: Vec<String>,
    pub settings: Vec<SettingScores>,
}

impl RegressionReport {
    /// Mean and half-width over all runs of `ll[method] - ll[ibp]`, per test point.
    pub fn loglik_difference(&self, method: usize) -> (f64, f64, usize) {
        let diffs: Vec<f64> = self
            .settings
            .iter()
            .flat_map(|s| &s.runs)
            .flat_map(|r| r.loglik[method].iter().zip(&r.loglik[IBP]).map(|(a, b)| a - b))
            .collect();
        let (m, ci) = mean_ci(&diffs);
        (m, ci, diffs.len())
    }

    /// Correlation of each free weight with each true parameter across all runs.
    pub fn weight_correlations(&self) -> Vec<(usize, String, f64)> {
        let all: Vec<(&[f64; 2], &RunScores)> =
            self.settings.iter().flat_map(|s| s.runs.iter().map(move |r| (&s.setting, r))).collect();
        let kf = all.first().map_or(0, |(_, r)| r.weights.len());
        let mut out = Vec::new();
        for (p, name) in self.param_names.iter().enumerate() {
            let param: Vec<f64> = all.iter().map(|(s, _)| s[p]).collect();
            for k in 1..kf {
                let wk: Vec<f64> = all.iter().map(|(_, r)| r.weights[k]).collect();
                out.push((k, name.clone(), correlation(&wk, &param)));
            }
        }
        out
    }
}

/// Training deltas per action, at most `cap` evenly strided tuples per batch.
fn pooled_data(
    batches: &[InstanceBatch],
    layout: &StateLayout,
    num_actions: usize,
    cap: usize,
) -> Vec<(Vec<State>, Vec<Vec<f64>>)> {
    let mut out = vec![(Vec::new(), Vec::new()); num_actions];
    for b in batches {
        for (a, slot) in out.iter_mut().enumerate() {
            let ts: Vec<&TransitionTuple> = b.for_action(a).collect();
            let stride = ts.len().div_ceil(cap.max(1)).max(1);
            for t in ts.iter().step_by(stride) {
                slot.0.push(t.s.clone());
                slot.1.push(layout.delta(&t.s, &t.s_next));
            }
        }
    }
    out
}

fn log_normal(y: f64, mean: f64, var: f64) -> f64 {
    let var = var.max(f64::MIN_POSITIVE);
    -0.5 * ((2.0 * PI * var).ln() + (y - mean).powi(2) / var)
}

struct Scorer<'a> {
    dim: usize,
    num_actions: usize,
    layout: &'a StateLayout,
    test: &'a [TransitionTuple],
    sq: Vec<f64>,
    ll: Vec<f64>,
}

impl<'a> Scorer<'a> {
    fn new(layout: &'a StateLayout, num_actions: usize, test: &'a [TransitionTuple]) -> Self {
        Scorer {
            dim: layout.dim(),
            num_actions,
            layout,
            test,
            sq: vec![0.0; layout.dim()],
            ll: vec![0.0; test.len()],
        }
    }

    fn add(&mut self, i: usize, d: usize, mean: f64, var: f64) {
        let y = self.layout.delta_dim(&self.test[i], d);
        self.sq[d] += (y - mean).powi(2);
        self.ll[i] += log_normal(y, mean, var);
    }

    /// Independent GP per (action, dimension) on the given data.
    fn gp(mut self, kernels: &[KernelParams], data: &[(Vec<State>, Vec<Vec<f64>>)]) -> Result<(Vec<f64>, Vec<f64>)> {
        for a in 0..self.num_actions {
            let idx: Vec<usize> = (0..self.test.len()).filter(|&i| self.test[i].a == a).collect();
            if idx.is_empty() {
                continue;
            }
            let query: Vec<State> = idx.iter().map(|&i| self.test[i].s.clone()).collect();
            for d in 0..self.dim {
                let p = &kernels[a * self.dim + d];
                let ys: Vec<f64> = data[a].1.iter().map(|y| y[d]).collect();
                let pred = GpRegressor::fit(&data[a].0, &ys, p)?.predict(&query)?;
                for (j, &i) in idx.iter().enumerate() {
                    self.add(i, d, pred.means[j], pred.variances[j] + p.noise_variance);
                }
            }
        }
        Ok(self.finish())
    }

    fn finish(self) -> (Vec<f64>, Vec<f64>) {
        let n = self.test.len().max(1) as f64;
        (self.sq.into_iter().map(|s| s / n).collect(), self.ll)
    }
}

fn score_run(
    model: &LatentDynamicsModel,
    pooled: &[(Vec<State>, Vec<Vec<f64>>)],
    train: &[TransitionTuple],
    test: &[TransitionTuple],
) -> Result<RunScores> {
    let layout = model.layout();
    let na = model.num_actions();
    let kernels = &model.support().kernels;
    let mut instance = vec![(Vec::new(), Vec::new()); na];
    for t in train {
        instance[t.a].0.push(t.s.clone());
        instance[t.a].1.push(layout.delta(&t.s, &t.s_next));
    }
    let mut both = pooled.to_vec();
    for (b, i) in both.iter_mut().zip(&instance) {
        b.0.extend(i.0.iter().cloned());
        b.1.extend(i.1.iter().cloned());
    }
    let mut mse = Vec::with_capacity(METHODS.len());
    let mut loglik = Vec::with_capacity(METHODS.len());
    for data in [&instance, pooled, &both] {
        let (m, l) = Scorer::new(layout, na, test).gp(kernels, data)?;
        mse.push(m);
        loglik.push(l);
    }
    let belief = filter_update(&init_belief(model), model, train)?;
    let w = mean_weights(&belief)?;
    let (_, cov) = belief.to_moments()?;
    let mut sc = Scorer::new(layout, na, test);
    for (i, t) in test.iter().enumerate() {
        let (mean, var) = model.predict_delta(&w, &t.s, t.a)?;
        // Weight uncertainty adds f_free^T Cov f_free per dimension.
        let basis = model.interpolate_basis(&t.s, t.a)?;
        for d in 0..layout.dim() {
            let f = basis.row(d).columns(1, cov.nrows()).transpose();
            sc.add(i, d, mean[d], var[d] + (f.transpose() * &cov * &f)[(0, 0)]);
        }
    }
    let (m, l) = sc.finish();
    mse.push(m);
    loglik.push(l);
    Ok(RunScores {
        mse,
        loglik,
        weights: w.as_slice().to_vec(),
    })
}

/// Held-out prediction on every evaluation setting, `runs` draws each.
pub fn evaluate_regression(
    cfg: &ExperimentConfig,
    model: &LatentDynamicsModel,
    batches: &[InstanceBatch],
    seed: u64,
) -> Result<RegressionReport> {
    let rc = &cfg.regression;
    if rc.points == 0 || rc.runs == 0 {
        return Err(HipError::Config("regression.points and regression.runs must be positive".into()));
    }
    let pooled = pooled_data(batches, model.layout(), model.num_actions(), rc.pooled_points_per_action);
    let sarsa = cfg.sarsa();
    let mut settings = Vec::new();
    for (si, &setting) in cfg.evaluation().iter().enumerate() {
        let env = cfg.domain.make(setting)?;
        let mut runs = Vec::with_capacity(rc.runs);
        for r in 0..rc.runs {
            let mut rng = stage_rng(seed, Stage::Regression, (si * rc.runs + r) as u64);
            let rows = sarsa_trajectories(&env, si, &sarsa, 1, rc.source_episodes, &mut rng)?;
            if rows.len() < 2 * rc.points {
                return Err(HipError::invalid(format!(
                    "setting {setting:?}: {} transitions, need {}",
                    rows.len(),
                    2 * rc.points
                )));
            }
            let picked: Vec<TransitionTuple> =
                sample(&mut rng, rows.len(), 2 * rc.points).into_iter().map(|i| rows[i].tuple()).collect();
            let (train, test) = picked.split_at(rc.points);
            runs.push(score_run(model, &pooled, train, test)?);
        }
        let s = SettingScores { setting, runs };
        log::info!(
            "setting {:?}: mse {}",
            setting,
            METHODS
                .iter()
                .enumerate()
                .map(|(m, name)| {
                    let v: Vec<String> = (0..model.dim()).map(|d| format!("{:.2e}", s.mse(m, d).0)).collect();
                    format!("{name}=[{}]", v.join(","))
                })
                .collect::<Vec<_>>()
                .join(" ")
        );
        settings.push(s);
    }
    Ok(RegressionReport {
        param_names: cfg.domain.param_names().iter().map(|s| s.to_string()).collect(),
        settings,
    })
}

/// Run the evaluation and write `regression_mse.csv`,
/// `regression_loglik.csv` and `eval_weights.csv` into `dir`.
pub fn eval_regression(
    cfg: &ExperimentConfig,
    model: &LatentDynamicsModel,
    batches: &[InstanceBatch],
    seed: u64,
    dir: &Path,
) -> Result<RegressionReport> {
    ensure_dir(dir)?;
    let report = evaluate_regression(cfg, model, batches, seed)?;
    let hash = cfg.hash();
    let names = &report.param_names;

    let mut w = MetricWriter::create(
        &dir.join("regression_mse.csv"),
        &hash,
        seed,
        &[names[0].as_str(), names[1].as_str(), "method", "dim", "mse_mean", "ci95", "runs"],
    )?;
    for s in &report.settings {
        for (m, name) in METHODS.iter().enumerate() {
            for d in 0..model.dim() {
                let (mean, ci) = s.mse(m, d);
                w.row(&[
                    s.setting[0].to_string(),
                    s.setting[1].to_string(),
                    name.to_string(),
                    d.to_string(),
                    mean.to_string(),
                    ci.to_string(),
                    s.runs.len().to_string(),
                ])?;
            }
        }
    }
    w.finish()?;

    let mut w = MetricWriter::create(
        &dir.join("regression_loglik.csv"),
        &hash,
        seed,
        &["method", "mean_diff_vs_ibp_gp", "ci95", "points"],
    )?;
    for (m, name) in METHODS.iter().enumerate().filter(|(m, _)| *m != IBP) {
        let (mean, ci, n) = report.loglik_difference(m);
        w.row(&[name.to_string(), mean.to_string(), ci.to_string(), n.to_string()])?;
    }
    w.finish()?;

    let mut w = MetricWriter::create(
        &dir.join("eval_weights.csv"),
        &hash,
        seed,
        &["row", names[0].as_str(), names[1].as_str(), "run", "quantity", "value"],
    )?;
    for s in &report.settings {
        for (r, run) in s.runs.iter().enumerate() {
            for (k, v) in run.weights.iter().enumerate().skip(1) {
                w.row(&[
                    "run".into(),
                    s.setting[0].to_string(),
                    s.setting[1].to_string(),
                    r.to_string(),
                    format!("w{}", k + 1),
                    v.to_string(),
                ])?;
            }
        }
    }
    for (k, name, c) in report.weight_correlations() {
        w.row(&[
            "correlation".into(),
            String::new(),
            String::new(),
            String::new(),
            format!("w{}~{name}", k + 1),
            c.to_string(),
        ])?;
    }
    w.finish()?;
    Ok(report)
}

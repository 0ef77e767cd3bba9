use std::path::Path;

use super::config::{stage_rng, ExperimentConfig, Stage};
use super::metrics::{correlation, ensure_dir, MetricWriter};
use crate::env::Environment;
use crate::error::{HipError, Result};
use crate::gibbs::{average_model, run_gibbs, GibbsConfig, GibbsFit, GibbsProblem};
use crate::gp::{
    fit_hyperparams, project_batch_centered, select_support_points, KernelParams, PooledMean, PreparedBatch, SupportSet,
};
use crate::model::{save_model, InstanceBatch, LatentDynamicsModel, StateLayout};

pub struct FitOutput {
    pub model: LatentDynamicsModel,
    /// Baseline-only pooled model on the same support set.
    pub average: LatentDynamicsModel,
    pub gibbs: GibbsFit,
    pub support: SupportSet,
    /// Greedy selection trace: worst reconstruction error after each point.
    pub support_errors: Vec<f64>,
}

/// Kernel per `(action, dimension)` fitted on the first batch that took the action.
pub fn fit_kernels(
    batches: &[InstanceBatch],
    layout: &StateLayout,
    num_actions: usize,
    cfg: &ExperimentConfig,
    rng: &mut dyn rand::RngCore,
) -> Result<Vec<KernelParams>> {
    let mut kernels = Vec::with_capacity(num_actions * layout.dim());
    for a in 0..num_actions {
        let source = batches
            .iter()
            .find(|b| b.for_action(a).next().is_some())
            .ok_or_else(|| HipError::invalid(format!("no batch ever took action {a}")))?;
        for d in 0..layout.dim() {
            let fit = fit_hyperparams(&source.tuples, layout, a, d, &cfg.fit.hyper, rng)?;
            log::debug!("kernel (a={a}, d={d}) from batch {}: {:?}", source.id, fit.params);
            kernels.push(fit.params);
        }
    }
    Ok(kernels)
}

/// Support selection, projection and the sampler, all in memory.
pub fn fit_batches(cfg: &ExperimentConfig, batches: &[InstanceBatch], seed: u64) -> Result<FitOutput> {
    if batches.len() < 2 {
        return Err(HipError::invalid(format!("fitting needs at least 2 batches, got {}", batches.len())));
    }
    let env = cfg.domain.make(cfg.training()[0])?;
    let layout = env.layout();
    let num_actions = env.num_actions();
    let mut rng = stage_rng(seed, Stage::Fit, 0);
    let kernels = fit_kernels(batches, &layout, num_actions, cfg, &mut rng)?;
    let prepared = batches
        .iter()
        .map(|b| PreparedBatch::new(b, &layout, num_actions, cfg.fit.max_points_per_action, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let selection = select_support_points(&prepared, &kernels, num_actions, layout.dim(), cfg.fit.support_points)?;
    let support = selection.support;
    let pooled = PooledMean::fit(&prepared, &support, cfg.fit.pooled_points_per_action)?;
    let projected = prepared
        .iter()
        .map(|p| project_batch_centered(p, &support, &pooled))
        .collect::<Result<Vec<_>>>()?;
    let problem = GibbsProblem::new(&projected, &support)?;
    let gcfg = GibbsConfig {
        seed,
        ..cfg.gibbs.clone()
    };
    let average = average_model(&problem, &support, &layout, &gcfg)?;
    let gibbs = run_gibbs(&problem, &support, &layout, &gcfg)?;
    log::info!(
        "fit: K={} from chain {} iteration {} (score {:.3}, start {:.3})",
        gibbs.model.num_features(),
        gibbs.chain,
        gibbs.iteration,
        gibbs.joint_loglik,
        gibbs.initial_loglik
    );
    Ok(FitOutput {
        model: gibbs.model.clone(),
        average,
        gibbs,
        support,
        support_errors: selection.max_errors,
    })
}

/// Fit and write `model.hipmdp`, `average.hipmdp`, `gibbs_diagnostics.csv`
/// and `train_weights.csv` into `dir`.
pub fn fit(cfg: &ExperimentConfig, batches: &[InstanceBatch], seed: u64, dir: &Path) -> Result<FitOutput> {
    ensure_dir(dir)?;
    let out = fit_batches(cfg, batches, seed)?;
    save_model(&out.model, dir.join("model.hipmdp"))?;
    save_model(&out.average, dir.join("average.hipmdp"))?;
    let hash = cfg.hash();

    let mut diag = MetricWriter::create(
        &dir.join("gibbs_diagnostics.csv"),
        &hash,
        seed,
        &["chain", "iteration", "num_features", "joint_loglik"],
    )?;
    for r in &out.gibbs.diagnostics {
        diag.row(&[
            r.chain.to_string(),
            r.iteration.to_string(),
            r.num_features.to_string(),
            r.joint_loglik.to_string(),
        ])?;
    }
    diag.finish()?;

    write_weight_table(&dir.join("train_weights.csv"), &hash, seed, batches, &out.gibbs.instance_weights)?;
    Ok(out)
}

/// Inferred weights next to the true parameters, followed by the
/// correlation of every weight with every parameter across instances.
pub fn write_weight_table(
    path: &Path,
    hash: &str,
    seed: u64,
    batches: &[InstanceBatch],
    weights: &[Vec<f64>],
) -> Result<()> {
    let names: Vec<String> = batches
        .first()
        .and_then(|b| b.true_params.as_ref())
        .map(|p| p.keys().cloned().collect())
        .unwrap_or_default();
    let mut w = MetricWriter::create(path, hash, seed, &["row", "instance_id", "quantity", "value"])?;
    for (b, ws) in batches.iter().zip(weights) {
        if let Some(p) = &b.true_params {
            for (name, v) in p {
                w.row(&["instance".into(), b.id.to_string(), name.clone(), v.to_string()])?;
            }
        }
        for (k, v) in ws.iter().enumerate().skip(1) {
            w.row(&["instance".into(), b.id.to_string(), format!("w{}", k + 1), v.to_string()])?;
        }
    }
    let kf = weights.first().map_or(0, Vec::len);
    for name in &names {
        let param: Vec<f64> = batches
            .iter()
            .map(|b| b.true_params.as_ref().and_then(|p| p.get(name).copied()).unwrap_or(f64::NAN))
            .collect();
        for k in 1..kf {
            let wk: Vec<f64> = weights.iter().map(|ws| ws[k]).collect();
            w.row(&[
                "correlation".into(),
                String::new(),
                format!("w{}~{name}", k + 1),
                correlation(&wk, &param).to_string(),
            ])?;
        }
    }
    w.finish()
}

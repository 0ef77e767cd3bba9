use std::fmt::Write as _;
use std::path::Path;

use super::config::{stage_rng, ExperimentConfig, Stage};
use super::data::sarsa_trajectories;
use super::metrics::{ensure_dir, MetricWriter};
use crate::env::sample_instance;
use crate::error::Result;
use crate::filter::{init_belief, mean_weights};
use crate::model::LatentDynamicsModel;

/// K, active rows per feature, the z pattern per (a,d) and the weight-mean posteriors.
pub fn describe_model(model: &LatentDynamicsModel) -> String {
    let mut s = String::new();
    let k = model.num_features();
    let _ = writeln!(
        s,
        "features K = {k}; actions {}, state dim {}, support points {}",
        model.num_actions(),
        model.dim(),
        model.support().len()
    );
    let _ = writeln!(s, "sigma_w = {}, sigma_w0 = {}", model.sigma_w(), model.sigma_w0());
    let _ = writeln!(s, "active rows per feature: {:?}", model.active_counts());
    let _ = writeln!(s, "active features per (a,d):");
    for a in 0..model.num_actions() {
        for d in 0..model.dim() {
            let on: Vec<usize> = (0..k).filter(|&j| model.z(j, a, d)).map(|j| j + 1).collect();
            let _ = writeln!(
                s,
                "  a={a} d={d}: {} active {:?}, noise variance {:.3e}",
                on.len(),
                on,
                model.noise_variance(a, d)
            );
        }
    }
    let _ = writeln!(s, "weight mean posteriors:");
    let _ = writeln!(s, "  w1 fixed at 1");
    for (j, m) in model.weight_means().iter().enumerate() {
        let _ = writeln!(s, "  w{}: mean {:.6}, variance {:.6e}", j + 2, m.mean, m.variance);
    }
    s
}

/// Filter the weights of a sampled evaluation instance one transition at a
/// time and write the trajectory of the posterior to `filter_trace.csv`.
pub fn filter_demo(
    cfg: &ExperimentConfig,
    model: &LatentDynamicsModel,
    seed: u64,
    points: usize,
    dir: &Path,
) -> Result<Vec<Vec<f64>>> {
    ensure_dir(dir)?;
    let mut rng = stage_rng(seed, Stage::Demo, 0);
    let setting = sample_instance(cfg.evaluation(), &mut rng)?;
    let env = cfg.domain.make(setting)?;
    let rows = sarsa_trajectories(&env, 0, &cfg.sarsa(), 1, cfg.regression.source_episodes, &mut rng)?;
    let names = cfg.domain.param_names();
    let mut header = vec!["step".to_string(), names[0].into(), names[1].into()];
    header.extend((2..=model.num_features()).flat_map(|k| [format!("w{k}_mean"), format!("w{k}_var")]));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = MetricWriter::create(&dir.join("filter_trace.csv"), &cfg.hash(), seed, &header)?;
    let mut belief = init_belief(model);
    let mut trace = Vec::new();
    for (step, row) in std::iter::once(None).chain(rows.iter().take(points).map(Some)).enumerate() {
        if let Some(row) = row {
            belief.observe(model, &row.tuple())?;
        }
        let (mean, cov) = belief.to_moments()?;
        let mut line = vec![step.to_string(), setting[0].to_string(), setting[1].to_string()];
        for j in 0..mean.len() {
            line.push(mean[j].to_string());
            line.push(cov[(j, j)].to_string());
        }
        w.row(&line)?;
        trace.push(mean_weights(&belief)?.as_slice().to_vec());
    }
    w.finish()?;
    log::info!("filtered {} transitions on setting {setting:?}", trace.len() - 1);
    Ok(trace)
}

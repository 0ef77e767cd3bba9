use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{stage_rng, ExperimentConfig, Stage};
use super::metrics::ensure_dir;
use crate::control::{sarsa_run, FourierValueFn, RealDynamics, SarsaConfig};
use crate::env::{batches_from_rows, read_trajectories, write_trajectories, Domain, Environment, TrajectoryRow};
use crate::error::{HipError, Result};
use crate::model::{InstanceBatch, TrueParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: usize,
    pub file: String,
    pub params: TrueParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub domain: Domain,
    pub config_hash: String,
    pub seed: u64,
    pub instances: Vec<ManifestEntry>,
}

/// Sarsa on the true simulator for `repetitions x episodes` episodes with a
/// value function carried across repetitions. Rows are tagged with `instance`.
pub fn sarsa_trajectories<E: Environment + ?Sized>(
    env: &E,
    instance: usize,
    sarsa: &SarsaConfig,
    repetitions: usize,
    episodes: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<Vec<TrajectoryRow>> {
    let cfg = SarsaConfig {
        episodes,
        ..sarsa.clone()
    };
    let mut vf = FourierValueFn::new(cfg.order, env.bounds(), env.num_actions())?;
    let mut rows = Vec::new();
    for rep in 0..repetitions {
        let run = sarsa_run(&mut RealDynamics(env), &mut vf, &cfg, rng)?;
        rows.extend(run.transitions.into_iter().map(|mut r| {
            r.instance = instance;
            r.episode += rep * episodes;
            r
        }));
    }
    Ok(rows)
}

/// Training trajectories for every configured setting, in order.
pub fn collect_training_data(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<(TrueParams, Vec<TrajectoryRow>)>> {
    let sarsa = cfg.sarsa();
    cfg.training()
        .iter()
        .enumerate()
        .map(|(i, &setting)| {
            let env = cfg.domain.make(setting)?;
            let mut rng = stage_rng(seed, Stage::Data, i as u64);
            let rows = sarsa_trajectories(&env, i, &sarsa, cfg.data.repetitions, cfg.data.episodes, &mut rng)?;
            Ok((env.params(), rows))
        })
        .collect()
}

pub fn training_batches(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<InstanceBatch>> {
    Ok(collect_training_data(cfg, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, (params, rows))| {
            let tuples = rows.iter().map(TrajectoryRow::tuple).collect();
            InstanceBatch::new(i, tuples).with_params(params)
        })
        .collect())
}

/// Write one trajectory file per training setting plus `manifest.json`.
pub fn gen_data(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<Manifest> {
    ensure_dir(dir)?;
    let mut instances = Vec::new();
    for (i, (params, rows)) in collect_training_data(cfg, seed)?.into_iter().enumerate() {
        let file = format!("batch_{i}.csv");
        write_trajectories(&dir.join(&file), &rows)?;
        log::info!("instance {i}: {} transitions", rows.len());
        instances.push(ManifestEntry { id: i, file, params });
    }
    let manifest = Manifest {
        domain: cfg.domain,
        config_hash: cfg.hash(),
        seed,
        instances,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| HipError::io(&path, e))?;
    Ok(manifest)
}

pub fn load_batches(dir: &Path) -> Result<(Manifest, Vec<InstanceBatch>)> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| HipError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| HipError::invalid(format!("{}: {e}", path.display())))?;
    let mut batches = Vec::with_capacity(manifest.instances.len());
    for entry in &manifest.instances {
        let rows = read_trajectories(&dir.join(&entry.file))?;
        let mut found = batches_from_rows(&rows);
        match (found.len(), found.pop()) {
            (1, Some(b)) if b.id == entry.id => batches.push(b.with_params(entry.params.clone())),
            _ => {
                return Err(HipError::invalid(format!(
                    "{} must hold exactly instance {}",
                    entry.file, entry.id
                )))
            }
        }
    }
    Ok((manifest, batches))
}

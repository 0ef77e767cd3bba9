//! Data drawn from a known ("planted") latent dynamics model, for checking
//! that batch inference recovers structure it was given.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::gibbs::{run_gibbs, GibbsConfig, GibbsFit, GibbsProblem};
use crate::gp::{gram, project_batch, KernelParams, PreparedBatch, SupportSet};
use crate::linalg::{cholesky_jittered, standard_normal};
use crate::model::{
    InstanceBatch, InstanceWeights, LatentDynamicsModel, ModelParts, StateLayout, TransitionTuple,
    WeightMeanPosterior,
};

#[derive(Clone, Debug)]
pub struct PlantedSpec {
    pub instances: usize,
    pub support_points: usize,
    pub noise_std: f64,
    /// `z[k][row]` for the non-baseline features.
    pub extra_filters: Vec<Vec<bool>>,
    pub points_per_action: usize,
    pub test_points_per_action: usize,
    /// Lengthscale of the model's kernel.
    pub lengthscale: f64,
    /// Lengthscale of the prior the planted basis values are drawn from.
    pub basis_lengthscale: f64,
}

impl PlantedSpec {
    /// Two actions and two state dimensions (four rows); two extra features,
    /// the first shared by rows 0 and 2, the second by rows 1 and 3.
    pub fn two_extra() -> Self {
        PlantedSpec {
            instances: 8,
            support_points: 30,
            noise_std: 0.05,
            extra_filters: vec![vec![true, false, true, false], vec![false, true, false, true]],
            points_per_action: 150,
            test_points_per_action: 50,
            lengthscale: 1.0,
            basis_lengthscale: 2.0,
        }
    }

    pub fn baseline_only() -> Self {
        PlantedSpec {
            extra_filters: Vec::new(),
            ..Self::two_extra()
        }
    }
}

const DIM: usize = 2;
const ACTIONS: usize = 2;
const BOX: f64 = 2.0;

pub struct PlantedData {
    pub truth: LatentDynamicsModel,
    pub true_weights: Vec<InstanceWeights>,
    pub support: SupportSet,
    pub layout: StateLayout,
    pub train: Vec<InstanceBatch>,
    pub test: Vec<InstanceBatch>,
}

fn uniform_state<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    (0..DIM).map(|_| rng.random_range(-BOX..BOX)).collect()
}

fn draw_tuples<R: Rng + ?Sized>(
    truth: &LatentDynamicsModel,
    w: &InstanceWeights,
    per_action: usize,
    rng: &mut R,
) -> Result<Vec<TransitionTuple>> {
    let mut out = Vec::with_capacity(per_action * ACTIONS);
    for a in 0..ACTIONS {
        for _ in 0..per_action {
            let s = uniform_state(rng);
            let s_next = truth.simulate_step(w, &s, a, rng)?;
            out.push(TransitionTuple::new(s, a, s_next, 0.0));
        }
    }
    Ok(out)
}

pub fn planted_data(spec: &PlantedSpec, seed: u64) -> Result<PlantedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = ACTIONS * DIM;
    let kernel = KernelParams::new(vec![spec.lengthscale; DIM], 1.0, spec.noise_std * spec.noise_std)?;
    let points: Vec<Vec<f64>> = (0..spec.support_points).map(|_| uniform_state(&mut rng)).collect();
    let support = SupportSet::new(points, vec![kernel.clone(); rows], ACTIONS, DIM)?;
    let layout = StateLayout::euclidean(DIM);
    let smooth = KernelParams::new(vec![spec.basis_lengthscale; DIM], 1.0, kernel.noise_variance)?;
    let chol = cholesky_jittered(gram(&support.points, &smooth), smooth.jitter(), "planted prior")?;
    let lower = chol.l();
    let mut z = vec![vec![true; rows]];
    z.extend(spec.extra_filters.iter().cloned());
    let f: Vec<Vec<DVector<f64>>> = z
        .iter()
        .map(|zk| {
            zk.iter()
                .map(|&on| {
                    if on {
                        &lower * standard_normal(support.len(), &mut rng)
                    } else {
                        DVector::zeros(support.len())
                    }
                })
                .collect()
        })
        .collect();
    let kf = z.len();
    let truth = LatentDynamicsModel::new(ModelParts {
        layout: layout.clone(),
        support: support.clone(),
        z,
        f,
        weight_means: vec![WeightMeanPosterior { mean: 0.0, variance: 1.0 }; kf - 1],
        sigma_w: 1.0,
        sigma_w0: 1.0,
    })?;
    let wdist = Normal::new(0.0, 1.0).expect("unit normal");
    let true_weights: Vec<InstanceWeights> = (0..spec.instances)
        .map(|b| {
            let free: Vec<f64> = (1..kf).map(|_| wdist.sample(&mut rng)).collect();
            InstanceWeights::from_free(b, &free)
        })
        .collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (b, w) in true_weights.iter().enumerate() {
        train.push(InstanceBatch::new(b, draw_tuples(&truth, w, spec.points_per_action, &mut rng)?));
        test.push(InstanceBatch::new(b, draw_tuples(&truth, w, spec.test_points_per_action, &mut rng)?));
    }
    Ok(PlantedData {
        truth,
        true_weights,
        support,
        layout,
        train,
        test,
    })
}

impl PlantedData {
    /// Project every training batch onto the planted support set using the
    /// generating kernels.
    pub fn problem(&self) -> Result<GibbsProblem> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let projected = self
            .train
            .iter()
            .map(|b| {
                let prep = PreparedBatch::new(b, &self.layout, ACTIONS, usize::MAX, &mut rng)?;
                project_batch(&prep, &self.support)
            })
            .collect::<Result<Vec<_>>>()?;
        GibbsProblem::new(&projected, &self.support)
    }

    /// Mean squared error of `predict_delta` on the held-out tuples, using
    /// each training instance's inferred weights.
    pub fn held_out_mse(&self, model: &LatentDynamicsModel, weights: &[Vec<f64>]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for (batch, w) in self.test.iter().zip(weights) {
            let w = InstanceWeights::new(batch.id, w.clone())?;
            for t in &batch.tuples {
                let (mean, _) = model.predict_delta(&w, &t.s, t.a)?;
                for (d, m) in mean.iter().enumerate() {
                    let err = t.s_next[d] - t.s[d] - m;
                    total += err * err;
                    count += 1;
                }
            }
        }
        Ok(total / count as f64)
    }
}

/// Outcome of fitting one seeded chain to planted data.
#[derive(Clone, Debug)]
pub struct RecoveryOutcome {
    pub extra_features: usize,
    pub held_out_mse: f64,
    pub noise_variance: f64,
    pub fit: GibbsFit,
}

pub fn recovery_trial(spec: &PlantedSpec, seed: u64, cfg: &GibbsConfig) -> Result<RecoveryOutcome> {
    let data = planted_data(spec, seed)?;
    let problem = data.problem()?;
    let cfg = GibbsConfig {
        seed,
        chains: 1,
        ..cfg.clone()
    };
    let fit = run_gibbs(&problem, &data.support, &data.layout, &cfg)?;
    let held_out_mse = data.held_out_mse(&fit.model, &fit.instance_weights)?;
    Ok(RecoveryOutcome {
        extra_features: fit.model.num_features() - 1,
        held_out_mse,
        noise_variance: spec.noise_std * spec.noise_std,
        fit,
    })
}

/// Weight-space distance between two models is not identifiable; compare
/// predictions instead. Mean squared difference of predicted deltas.
pub fn prediction_gap(
    a: &LatentDynamicsModel,
    wa: &InstanceWeights,
    b: &LatentDynamicsModel,
    wb: &InstanceWeights,
    states: &[Vec<f64>],
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in states {
        for act in 0..a.num_actions() {
            let (ma, _) = a.predict_delta(wa, s, act)?;
            let (mb, _) = b.predict_delta(wb, s, act)?;
            let diff = DMatrix::from_fn(ma.len(), 1, |i, _| ma[i] - mb[i]);
            total += diff.norm_squared();
            n += ma.len();
        }
    }
    Ok(total / n as f64)
}

//! The HiP-MDP transition model: domain types, forward prediction given
//! instance weights, and the on-disk model format.

mod io;
mod types;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub use io::{load_model, model_from_str, model_to_string, save_model, MODEL_FORMAT_VERSION};
pub use types::{
    wrap_angle, InstanceBatch, InstanceWeights, State, StateLayout, TransitionTuple, TrueParams,
};

use crate::error::{HipError, Result};
use crate::gp::{noisy_gram, SupportSet};
use crate::linalg::cholesky_jittered;

/// Gaussian posterior over the prior mean of one latent weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightMeanPosterior {
    pub mean: f64,
    pub variance: f64,
}

/// Everything that defines a trained model, before validation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParts {
    pub layout: StateLayout,
    pub support: SupportSet,
    /// `z[k][row]`, row-major over action then dimension.
    pub z: Vec<Vec<bool>>,
    /// `f[k][row]`, basis values at the support points.
    pub f: Vec<Vec<DVector<f64>>>,
    /// One entry per feature `k > 1`.
    pub weight_means: Vec<WeightMeanPosterior>,
    pub sigma_w: f64,
    pub sigma_w0: f64,
}

impl ModelParts {
    pub fn num_features(&self) -> usize {
        self.z.len()
    }

    /// Drop features (other than the baseline) that no row uses.
    pub fn prune(mut self) -> Self {
        let mut k = 1;
        while k < self.z.len() {
            if self.z[k].iter().any(|&on| on) {
                k += 1;
            } else {
                self.z.remove(k);
                self.f.remove(k);
                if k - 1 < self.weight_means.len() {
                    self.weight_means.remove(k - 1);
                }
            }
        }
        self
    }
}

/// A trained, immutable HiP-MDP dynamics model.
#[derive(Clone, Debug)]
pub struct LatentDynamicsModel {
    parts: ModelParts,
    /// `(K(S*,S*) + s I)^-1 f_k(S*)` per feature and row.
    interp: Vec<Vec<DVector<f64>>>,
}

impl PartialEq for LatentDynamicsModel {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

impl LatentDynamicsModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        validate(&parts)?;
        let support = &parts.support;
        let mut interp = vec![Vec::with_capacity(support.num_rows()); parts.z.len()];
        for row in 0..support.num_rows() {
            let p = &support.kernels[row];
            let chol = cholesky_jittered(noisy_gram(&support.points, p), 0.0, "support Gram matrix")?;
            for k in 0..parts.z.len() {
                let coef = if parts.z[k][row] {
                    chol.solve(&parts.f[k][row])
                } else {
                    DVector::zeros(support.len())
                };
                interp[k].push(coef);
            }
        }
        Ok(LatentDynamicsModel { parts, interp })
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn into_parts(self) -> ModelParts {
        self.parts
    }

    pub fn num_features(&self) -> usize {
        self.parts.z.len()
    }

    pub fn num_actions(&self) -> usize {
        self.parts.support.num_actions
    }

    pub fn dim(&self) -> usize {
        self.parts.support.dim
    }

    pub fn layout(&self) -> &StateLayout {
        &self.parts.layout
    }

    pub fn support(&self) -> &SupportSet {
        &self.parts.support
    }

    pub fn row(&self, a: usize, d: usize) -> usize {
        self.parts.support.row(a, d)
    }

    pub fn z(&self, k: usize, a: usize, d: usize) -> bool {
        self.parts.z[k][self.row(a, d)]
    }

    pub fn basis_values(&self, k: usize, a: usize, d: usize) -> &DVector<f64> {
        &self.parts.f[k][self.row(a, d)]
    }

    pub fn weight_means(&self) -> &[WeightMeanPosterior] {
        &self.parts.weight_means
    }

    pub fn sigma_w(&self) -> f64 {
        self.parts.sigma_w
    }

    pub fn sigma_w0(&self) -> f64 {
        self.parts.sigma_w0
    }

    pub fn noise_variance(&self, a: usize, d: usize) -> f64 {
        self.parts.support.kernel(a, d).noise_variance
    }

    /// Number of rows using each feature.
    pub fn active_counts(&self) -> Vec<usize> {
        self.parts
            .z
            .iter()
            .map(|zk| zk.iter().filter(|&&on| on).count())
            .collect()
    }

    fn check_query(&self, s: &[f64], a: usize) -> Result<()> {
        if s.len() != self.dim() {
            return Err(HipError::invalid(format!(
                "state has dimension {}, model expects {}",
                s.len(),
                self.dim()
            )));
        }
        if a >= self.num_actions() {
            return Err(HipError::invalid(format!(
                "action {a} outside 0..{}",
                self.num_actions()
            )));
        }
        Ok(())
    }

    /// Interpolated basis means at `s` under action `a`: a `d x K` matrix,
    /// zero where the filter switches a feature off.
    pub fn interpolate_basis(&self, s: &[f64], a: usize) -> Result<DMatrix<f64>> {
        self.check_query(s, a)?;
        let dim = self.dim();
        let kf = self.num_features();
        let mut out = DMatrix::zeros(dim, kf);
        let points = &self.parts.support.points;
        let mut kvec = DVector::zeros(points.len());
        for d in 0..dim {
            let row = self.row(a, d);
            let p = &self.parts.support.kernels[row];
            for (i, sp) in points.iter().enumerate() {
                kvec[i] = p.k(s, sp);
            }
            for k in 0..kf {
                if self.parts.z[k][row] {
                    out[(d, k)] = kvec.dot(&self.interp[k][row]);
                }
            }
        }
        Ok(out)
    }

    /// Predicted mean and variance of `s' - s`.
    pub fn predict_delta(
        &self,
        w: &InstanceWeights,
        s: &[f64],
        a: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if w.len() != self.num_features() {
            return Err(HipError::invalid(format!(
                "{} weights for a model with {} features",
                w.len(),
                self.num_features()
            )));
        }
        let basis = self.interpolate_basis(s, a)?;
        let mean = basis * DVector::from_column_slice(w.as_slice());
        let var = (0..self.dim()).map(|d| self.noise_variance(a, d)).collect();
        Ok((mean.iter().copied().collect(), var))
    }

    /// One stochastic transition: `s + mean + noise`, angles wrapped.
    pub fn simulate_step<R: Rng + ?Sized>(
        &self,
        w: &InstanceWeights,
        s: &[f64],
        a: usize,
        rng: &mut R,
    ) -> Result<State> {
        let (mean, var) = self.predict_delta(w, s, a)?;
        let delta: Vec<f64> = mean
            .iter()
            .zip(&var)
            .map(|(m, v)| {
                let e: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * e
            })
            .collect();
        Ok(self.parts.layout.advance(s, &delta))
    }
}

fn validate(parts: &ModelParts) -> Result<()> {
    let support = &parts.support;
    let rows = support.num_rows();
    let kf = parts.z.len();
    if kf == 0 {
        return Err(HipError::format("z", "model needs at least the baseline feature"));
    }
    if parts.layout.dim() != support.dim {
        return Err(HipError::format("layout", "state layout dimension differs from support"));
    }
    if parts.f.len() != kf {
        return Err(HipError::format("f", "feature count differs from z"));
    }
    if parts.weight_means.len() != kf - 1 {
        return Err(HipError::format(
            "weight_means",
            format!("expected {} entries, got {}", kf - 1, parts.weight_means.len()),
        ));
    }
    for (k, zk) in parts.z.iter().enumerate() {
        if zk.len() != rows {
            return Err(HipError::format("z", format!("feature {k} has wrong row count")));
        }
        if k == 0 && !zk.iter().all(|&on| on) {
            return Err(HipError::format("z", "baseline feature must be active in every row"));
        }
        if k > 0 && !zk.iter().any(|&on| on) {
            return Err(HipError::format("z", format!("feature {} is inactive everywhere", k + 1)));
        }
    }
    for (k, fk) in parts.f.iter().enumerate() {
        if fk.len() != rows {
            return Err(HipError::format("f", format!("feature {k} has wrong row count")));
        }
        for v in fk {
            if v.len() != support.len() {
                return Err(HipError::format("f", "basis vector length differs from support size"));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(HipError::format("f", "non-finite basis value"));
            }
        }
    }
    for wm in &parts.weight_means {
        if !wm.mean.is_finite() || !(wm.variance >= 0.0) || !wm.variance.is_finite() {
            return Err(HipError::format("weight_means", "non-finite or negative entry"));
        }
    }
    if !(parts.sigma_w > 0.0 && parts.sigma_w.is_finite()) {
        return Err(HipError::format("sigma_w", "must be positive and finite"));
    }
    if !(parts.sigma_w0 > 0.0 && parts.sigma_w0.is_finite()) {
        return Err(HipError::format("sigma_w0", "must be positive and finite"));
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::testing::toy_model;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_only_ignores_instance() {
        let m = toy_model();
        let mut parts = m.parts().clone();
        parts.z.truncate(1);
        parts.f.truncate(1);
        parts.weight_means.clear();
        let base = LatentDynamicsModel::new(parts).unwrap();
        let w = InstanceWeights::baseline(3);
        let (mean, _) = base.predict_delta(&w, &[0.8], 0).unwrap();
        let basis = base.interpolate_basis(&[0.8], 0).unwrap();
        assert_eq!(mean[0], basis[(0, 0)]);
    }

    #[test]
    fn zero_weights_give_baseline() {
        let m = toy_model();
        let (mean, _) = m
            .predict_delta(&InstanceWeights::from_free(0, &[0.0]), &[1.1], 0)
            .unwrap();
        let basis = m.interpolate_basis(&[1.1], 0).unwrap();
        assert_eq!(mean[0], basis[(0, 0)]);
    }

    #[test]
    fn prediction_is_the_weighted_sum_of_bases() {
        let m = toy_model();
        let s = [0.9];
        let w = InstanceWeights::from_free(0, &[-1.7]);
        let basis = m.interpolate_basis(&s, 0).unwrap();
        let (mean, var) = m.predict_delta(&w, &s, 0).unwrap();
        assert!((mean[0] - (basis[(0, 0)] - 1.7 * basis[(0, 1)])).abs() < 1e-14);
        assert_eq!(var[0], 1e-4);
        // feature 2 is filtered out for action 1
        assert_eq!(m.interpolate_basis(&s, 1).unwrap()[(0, 1)], 0.0);
    }

    #[test]
    fn wrong_weight_length_is_rejected() {
        let m = toy_model();
        assert!(m
            .predict_delta(&InstanceWeights::baseline(0), &[0.0], 0)
            .is_err());
        assert!(m
            .predict_delta(&InstanceWeights::from_free(0, &[0.0]), &[0.0, 1.0], 0)
            .is_err());
    }

    #[test]
    fn noiseless_step_is_deterministic_sum() {
        let m = toy_model();
        let mut parts = m.parts().clone();
        for k in parts.support.kernels.iter_mut() {
            k.noise_variance = f64::MIN_POSITIVE;
        }
        let m = LatentDynamicsModel::new(parts).unwrap();
        let w = InstanceWeights::from_free(0, &[0.3]);
        let (mean, _) = m.predict_delta(&w, &[0.4], 0).unwrap();
        let next = m
            .simulate_step(&w, &[0.4], 0, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!((next[0] - (0.4 + mean[0])).abs() < 1e-12);
    }

    #[test]
    fn fixed_seed_repeats_trajectory() {
        let m = toy_model();
        let w = InstanceWeights::from_free(0, &[0.3]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = vec![0.2];
            let mut out = Vec::new();
            for t in 0..20 {
                s = m.simulate_step(&w, &s, t % 2, &mut rng).unwrap();
                out.push(s[0]);
            }
            out
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn monte_carlo_mean_matches_prediction() {
        let m = toy_model();
        let w = InstanceWeights::from_free(0, &[0.8]);
        let s = [1.3];
        let (mean, var) = m.predict_delta(&w, &s, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let avg = (0..n)
            .map(|_| m.simulate_step(&w, &s, 0, &mut rng).unwrap()[0] - s[0])
            .sum::<f64>()
            / n as f64;
        let se = (var[0] / n as f64).sqrt();
        assert!((avg - mean[0]).abs() < 3.0 * se, "{avg} vs {}", mean[0]);
    }

    #[test]
    fn prune_drops_dead_features() {
        let m = toy_model();
        let mut parts = m.parts().clone();
        parts.z.push(vec![false, false]);
        parts.f.push(vec![DVector::zeros(5), DVector::zeros(5)]);
        parts.weight_means.push(WeightMeanPosterior {
            mean: 0.0,
            variance: 1.0,
        });
        assert!(LatentDynamicsModel::new(parts.clone()).is_err());
        let pruned = parts.prune();
        assert_eq!(pruned.num_features(), 2);
        assert!(LatentDynamicsModel::new(pruned).is_ok());
    }
}

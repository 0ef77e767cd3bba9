//! Online identification of a new instance: a Gaussian belief over the free
//! weights `w_2..w_K` in information form, updated in closed form from
//! observed transitions.
//!
//! Basis uncertainty is ignored; the filter sees the model only through
//! [`LatentDynamicsModel::interpolate_basis`] and the per-row noise.

use nalgebra::{DMatrix, DVector};

use crate::error::{HipError, Result};
use crate::linalg::cholesky_jittered;
use crate::model::{InstanceWeights, LatentDynamicsModel, TransitionTuple};

/// `N(P^-1 h, P^-1)` over the free weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBelief {
    pub instance: usize,
    h: DVector<f64>,
    p: DMatrix<f64>,
}

impl WeightBelief {
    pub fn new(h: DVector<f64>, p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != h.len() || p.ncols() != h.len() {
            return Err(HipError::invalid("belief precision must be square and match h"));
        }
        if !h.iter().chain(p.iter()).all(|v| v.is_finite()) {
            return Err(HipError::invalid("belief has non-finite entries"));
        }
        if (&p - p.transpose()).amax() > 1e-9 * (1.0 + p.amax()) {
            return Err(HipError::invalid("belief precision is not symmetric"));
        }
        Ok(WeightBelief { instance: 0, h, p })
    }

    pub fn from_moments(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(HipError::invalid("covariance shape does not match mean"));
        }
        let chol = cholesky_jittered(cov.clone(), 0.0, "belief covariance")?;
        let p = chol.inverse();
        let p = (&p + p.transpose()) * 0.5;
        WeightBelief::new(&p * mean, p)
    }

    pub fn to_moments(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let chol = cholesky_jittered(self.p.clone(), 0.0, "belief precision")?;
        Ok((chol.solve(&self.h), chol.inverse()))
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn information(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Fold one transition into the belief.
    pub fn observe(&mut self, model: &LatentDynamicsModel, t: &TransitionTuple) -> Result<()> {
        if model.num_features() - 1 != self.dim() {
            return Err(HipError::invalid(format!(
                "belief over {} weights used with a {}-feature model",
                self.dim(),
                model.num_features()
            )));
        }
        if t.s.len() != model.dim() || t.s_next.len() != model.dim() {
            return Err(HipError::invalid(format!(
                "tuple states have dimension {}/{}, model expects {}",
                t.s.len(),
                t.s_next.len(),
                model.dim()
            )));
        }
        if self.dim() == 0 {
            return Ok(());
        }
        let basis = model.interpolate_basis(&t.s, t.a)?;
        let delta = model.layout().delta(&t.s, &t.s_next);
        let q = self.dim();
        for d in 0..model.dim() {
            let inv = 1.0 / model.noise_variance(t.a, d);
            let resid = delta[d] - basis[(d, 0)];
            for i in 0..q {
                let fi = basis[(d, i + 1)];
                if fi == 0.0 {
                    continue;
                }
                self.h[i] += fi * inv * resid;
                for j in 0..q {
                    self.p[(i, j)] += fi * inv * basis[(d, j + 1)];
                }
            }
        }
        Ok(())
    }
}

/// Prior for a new instance: independent `N(E[mu_k], sigma_w^2 + var(mu_k))`.
pub fn init_belief(model: &LatentDynamicsModel) -> WeightBelief {
    let s2w = model.sigma_w() * model.sigma_w();
    let wm = model.weight_means();
    let var: Vec<f64> = wm.iter().map(|m| s2w + m.variance).collect();
    let h = DVector::from_fn(wm.len(), |i, _| wm[i].mean / var[i]);
    let p = DMatrix::from_fn(wm.len(), wm.len(), |i, j| if i == j { 1.0 / var[i] } else { 0.0 });
    WeightBelief { instance: 0, h, p }
}

/// Belief after folding in every tuple. Order does not matter.
#[must_use = "the updated belief is returned, the input is left unchanged"]
pub fn filter_update(
    belief: &WeightBelief,
    model: &LatentDynamicsModel,
    tuples: &[TransitionTuple],
) -> Result<WeightBelief> {
    if tuples.is_empty() {
        return Err(HipError::invalid("filter update needs at least one tuple"));
    }
    let mut out = belief.clone();
    for t in tuples {
        out.observe(model, t)?;
    }
    Ok(out)
}

/// Posterior mean weights with the fixed leading 1.
pub fn mean_weights(belief: &WeightBelief) -> Result<InstanceWeights> {
    if belief.dim() == 0 {
        return Ok(InstanceWeights::baseline(belief.instance));
    }
    let chol = cholesky_jittered(belief.p.clone(), 0.0, "belief precision")?;
    let mean = chol.solve(&belief.h);
    Ok(InstanceWeights::from_free(belief.instance, mean.as_slice()))
}

use nalgebra::DVector;

use super::kernel::cross_cov;
use super::regress::{noisy_gram, GpRegressor};
use super::support::{PreparedBatch, SupportSet};
use crate::error::{HipError, Result};
use crate::linalg::cholesky_jittered;
use crate::model::State;

/// A batch replaced by GP-predicted state differences at every support point.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedBatch {
    pub id: usize,
    /// One slot per `(action, dimension)` row; `None` when the batch never
    /// took that action.
    pub slots: Vec<Option<DVector<f64>>>,
}

impl ProjectedBatch {
    pub fn slot(&self, row: usize) -> Option<&DVector<f64>> {
        self.slots[row].as_ref()
    }

    pub fn present_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(r, s)| s.as_ref().map(|_| r))
    }
}

/// `Delta_b(S*) = K(S*, S_ab) (K(S_ab, S_ab) + s_ad I)^-1 Delta_b(S_abd)` for
/// every row.
pub fn project_batch(batch: &PreparedBatch, support: &SupportSet) -> Result<ProjectedBatch> {
    project_with_mean(batch, support, None)
}

/// GP mean of the pooled data of all batches, one regressor per row.
#[derive(Clone, Debug)]
pub struct PooledMean {
    rows: Vec<Option<GpRegressor>>,
}

impl PooledMean {
    /// Pool every batch's points per action; above `cap` points an even
    /// stride is kept.
    pub fn fit(batches: &[PreparedBatch], support: &SupportSet, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(HipError::invalid("pooled point cap must be positive"));
        }
        let mut rows = vec![None; support.num_rows()];
        for a in 0..support.num_actions {
            let data: Vec<_> = batches.iter().filter_map(|b| b.actions.get(a).and_then(Option::as_ref)).collect();
            let total: usize = data.iter().map(|d| d.xs.len()).sum();
            if total == 0 {
                continue;
            }
            let stride = total.div_ceil(cap);
            for d in 0..support.dim {
                let (xs, ys): (Vec<State>, Vec<f64>) = data
                    .iter()
                    .flat_map(|ad| ad.xs.iter().cloned().zip(ad.ys[d].iter().copied()))
                    .step_by(stride)
                    .unzip();
                rows[support.row(a, d)] = Some(GpRegressor::fit(&xs, &ys, support.kernel(a, d))?);
            }
        }
        Ok(PooledMean { rows })
    }

    pub fn at(&self, row: usize, xs: &[State]) -> DVector<f64> {
        match &self.rows[row] {
            Some(gp) => gp.means(xs),
            None => DVector::zeros(xs.len()),
        }
    }
}

/// Projection under a GP prior whose mean is the pooled fit: support points
/// far from this batch's data revert to the pooled mean instead of zero.
pub fn project_batch_centered(
    batch: &PreparedBatch,
    support: &SupportSet,
    prior: &PooledMean,
) -> Result<ProjectedBatch> {
    if prior.rows.len() != support.num_rows() {
        return Err(HipError::invalid("pooled mean does not match the support set"));
    }
    project_with_mean(batch, support, Some(prior))
}

fn project_with_mean(batch: &PreparedBatch, support: &SupportSet, prior: Option<&PooledMean>) -> Result<ProjectedBatch> {
    if batch.actions.len() != support.num_actions {
        return Err(HipError::invalid(format!(
            "batch {} covers {} actions, support set {}",
            batch.id,
            batch.actions.len(),
            support.num_actions
        )));
    }
    if batch.actions.iter().all(Option::is_none) {
        return Err(HipError::invalid(format!("batch {} is empty", batch.id)));
    }
    let mut slots = vec![None; support.num_rows()];
    for (a, data) in batch.actions.iter().enumerate() {
        let Some(data) = data else {
            log::debug!("batch {} has no data for action {a}", batch.id);
            continue;
        };
        for d in 0..support.dim {
            let row = support.row(a, d);
            let p = support.kernel(a, d);
            let mut y = DVector::from_column_slice(&data.ys[d]);
            if let Some(prior) = prior {
                y -= prior.at(row, &data.xs);
            }
            let chol = cholesky_jittered(noisy_gram(&data.xs, p), 0.0, "batch covariance")?;
            let alpha = chol.solve(&y);
            let mut proj = cross_cov(&support.points, &data.xs, p) * alpha;
            if let Some(prior) = prior {
                proj += prior.at(row, &support.points);
            }
            slots[row] = Some(proj);
        }
    }
    Ok(ProjectedBatch { id: batch.id, slots })
}

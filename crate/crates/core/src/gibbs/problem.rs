use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{HipError, Result};
use crate::gp::{gram, ProjectedBatch, SupportSet};

/// One `(action, dimension)` row in the eigenbasis of its prior covariance
/// `K(S*, S*) + jitter I = U diag(lambda) U^T`. Noise is isotropic, so the
/// rotated problem decouples over eigen-coordinates.
#[derive(Clone, Debug)]
pub(crate) struct RowData {
    pub u: DMatrix<f64>,
    pub lambda: DVector<f64>,
    pub noise: f64,
    /// `(instance index, U^T Delta_b(S*))` for every instance with data.
    pub obs: Vec<(usize, DVector<f64>)>,
}

impl RowData {
    pub fn instances(&self) -> impl Iterator<Item = usize> + '_ {
        self.obs.iter().map(|(b, _)| *b)
    }
}

/// Projected training data prepared for sampling.
#[derive(Clone, Debug)]
pub struct GibbsProblem {
    pub(crate) rows: Vec<RowData>,
    batch_ids: Vec<usize>,
    support_len: usize,
}

impl GibbsProblem {
    pub fn new(batches: &[ProjectedBatch], support: &SupportSet) -> Result<Self> {
        if batches.len() < 2 {
            return Err(HipError::invalid(format!(
                "batch inference needs at least 2 instances, got {}",
                batches.len()
            )));
        }
        let n = support.len();
        let mut rows = Vec::with_capacity(support.num_rows());
        for row in 0..support.num_rows() {
            let p = &support.kernels[row];
            let eig = SymmetricEigen::new(gram(&support.points, p));
            let lambda = eig.eigenvalues.map(|l| l.max(0.0) + p.jitter());
            let u = eig.eigenvectors;
            let mut obs = Vec::new();
            for (b, batch) in batches.iter().enumerate() {
                if batch.slots.len() != support.num_rows() {
                    return Err(HipError::invalid(format!(
                        "batch {} has {} rows, support set {}",
                        batch.id,
                        batch.slots.len(),
                        support.num_rows()
                    )));
                }
                if let Some(delta) = batch.slot(row) {
                    if delta.len() != n {
                        return Err(HipError::invalid(format!(
                            "batch {} row {row} has {} values for {n} support points",
                            batch.id,
                            delta.len()
                        )));
                    }
                    obs.push((b, u.tr_mul(delta)));
                }
            }
            if obs.is_empty() {
                let (a, d) = (row / support.dim, row % support.dim);
                return Err(HipError::invalid(format!(
                    "no instance has data for action {a}, dimension {d}"
                )));
            }
            rows.push(RowData {
                u,
                lambda,
                noise: p.noise_variance,
                obs,
            });
        }
        Ok(GibbsProblem {
            rows,
            batch_ids: batches.iter().map(|b| b.id).collect(),
            support_len: n,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_instances(&self) -> usize {
        self.batch_ids.len()
    }

    pub fn batch_ids(&self) -> &[usize] {
        &self.batch_ids
    }

    pub fn support_len(&self) -> usize {
        self.support_len
    }

    pub fn noise_variance(&self, row: usize) -> f64 {
        self.rows[row].noise
    }

    /// Instances with data in `row`, in batch order.
    pub fn row_instances(&self, row: usize) -> Vec<usize> {
        self.rows[row].instances().collect()
    }

    pub(crate) fn to_support(&self, row: usize, g: &DVector<f64>) -> DVector<f64> {
        &self.rows[row].u * g
    }

    pub(crate) fn to_eigen(&self, row: usize, f: &DVector<f64>) -> DVector<f64> {
        self.rows[row].u.tr_mul(f)
    }
}

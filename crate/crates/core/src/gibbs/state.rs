use nalgebra::{DMatrix, DVector};

use super::problem::GibbsProblem;
use crate::error::{HipError, Result};

/// Sampler state. Basis values are held in each row's eigen-coordinates and
/// are exactly zero wherever the filter is off.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsState {
    /// `z[k][row]`
    pub(crate) z: Vec<Vec<bool>>,
    /// `g[k][row] = U_row^T f_k,row(S*)`
    pub(crate) g: Vec<Vec<DVector<f64>>>,
    /// `w[b][k]`, with `w[b][0] = 1`
    pub(crate) w: Vec<Vec<f64>>,
    /// `mu[k]`; entry 0 is unused and held at 1
    pub(crate) mu: Vec<f64>,
}

impl GibbsState {
    /// Baseline-only state with zero basis values.
    pub(crate) fn baseline(problem: &GibbsProblem) -> Self {
        let n = problem.support_len();
        GibbsState {
            z: vec![vec![true; problem.num_rows()]],
            g: vec![vec![DVector::zeros(n); problem.num_rows()]],
            w: vec![vec![1.0]; problem.num_instances()],
            mu: vec![1.0],
        }
    }

    /// Build a state from basis values in support-point coordinates
    /// (`f[k][row]`), weights `w[b][k]` and weight means `mu[k]` (`mu[0]` is
    /// ignored).
    pub fn from_parts(
        problem: &GibbsProblem,
        z: Vec<Vec<bool>>,
        f: Vec<Vec<DVector<f64>>>,
        w: Vec<Vec<f64>>,
        mu: Vec<f64>,
    ) -> Result<Self> {
        let kf = z.len();
        if kf == 0 || f.len() != kf || mu.len() != kf || w.len() != problem.num_instances() {
            return Err(HipError::invalid("inconsistent sampler state shapes"));
        }
        let mut g = Vec::with_capacity(kf);
        for k in 0..kf {
            if z[k].len() != problem.num_rows() || f[k].len() != problem.num_rows() {
                return Err(HipError::invalid("sampler state has the wrong row count"));
            }
            let mut gk = Vec::with_capacity(problem.num_rows());
            for row in 0..problem.num_rows() {
                if f[k][row].len() != problem.support_len() {
                    return Err(HipError::invalid("basis vector length differs from support size"));
                }
                gk.push(if z[k][row] {
                    problem.to_eigen(row, &f[k][row])
                } else {
                    DVector::zeros(problem.support_len())
                });
            }
            g.push(gk);
        }
        let mut mu = mu;
        mu[0] = 1.0;
        let state = GibbsState { z, g, w, mu };
        state.check_invariants(problem)?;
        Ok(state)
    }

    pub fn num_features(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self, k: usize, row: usize) -> bool {
        self.z[k][row]
    }

    pub fn weights(&self, b: usize) -> &[f64] {
        &self.w[b]
    }

    pub fn weight_mean(&self, k: usize) -> f64 {
        self.mu[k]
    }

    /// `f_k,row(S*)` in support-point coordinates.
    pub fn basis(&self, problem: &GibbsProblem, k: usize, row: usize) -> DVector<f64> {
        problem.to_support(row, &self.g[k][row])
    }

    /// Column `k` of the weight matrix, over all instances.
    pub(crate) fn feature_weights(&self, k: usize) -> Vec<f64> {
        self.w.iter().map(|wb| wb[k]).collect()
    }

    /// Rows using feature `k`.
    pub fn count(&self, k: usize) -> usize {
        self.z[k].iter().filter(|&&on| on).count()
    }

    /// Rows other than `row` using feature `k`.
    pub(crate) fn count_excluding(&self, k: usize, row: usize) -> usize {
        self.count(k) - usize::from(self.z[k][row])
    }

    pub(crate) fn active(&self, row: usize) -> Vec<usize> {
        (0..self.z.len()).filter(|&k| self.z[k][row]).collect()
    }

    /// `y_b - sum_{k active, k not in skip} w_kb g_k` for every instance in
    /// the row, in the row's instance order.
    pub(crate) fn residuals(
        &self,
        problem: &GibbsProblem,
        row: usize,
        skip: &[usize],
    ) -> Vec<DVector<f64>> {
        let data = &problem.rows[row];
        let used: Vec<usize> = self
            .active(row)
            .into_iter()
            .filter(|k| !skip.contains(k))
            .collect();
        data.obs
            .iter()
            .map(|(b, y)| {
                let mut e = y.clone();
                for &k in &used {
                    e.axpy(-self.w[*b][k], &self.g[k][row], 1.0);
                }
                e
            })
            .collect()
    }

    /// Weight matrix restricted to the row's instances and the given
    /// features: `B_row x features.len()`.
    pub(crate) fn weight_matrix(
        &self,
        problem: &GibbsProblem,
        row: usize,
        features: &[usize],
    ) -> DMatrix<f64> {
        let obs = &problem.rows[row].obs;
        DMatrix::from_fn(obs.len(), features.len(), |i, j| self.w[obs[i].0][features[j]])
    }

    pub(crate) fn push_feature(&mut self, z: Vec<bool>, g: Vec<DVector<f64>>, w: &[f64], mu: f64) {
        self.z.push(z);
        self.g.push(g);
        for (wb, &v) in self.w.iter_mut().zip(w) {
            wb.push(v);
        }
        self.mu.push(mu);
    }

    pub(crate) fn remove_feature(&mut self, k: usize) {
        debug_assert!(k > 0);
        self.z.remove(k);
        self.g.remove(k);
        for wb in &mut self.w {
            wb.remove(k);
        }
        self.mu.remove(k);
    }

    /// Baseline fixed on, weights anchored, shapes consistent, no empty
    /// feature columns, zero basis where filtered out.
    pub fn check_invariants(&self, problem: &GibbsProblem) -> Result<()> {
        let kf = self.z.len();
        let bad = |msg: &str| Err(HipError::invalid(format!("sampler state: {msg}")));
        if kf == 0 || self.g.len() != kf || self.mu.len() != kf {
            return bad("feature count mismatch");
        }
        if !self.z[0].iter().all(|&on| on) {
            return bad("baseline filter must be on in every row");
        }
        if self.w.len() != problem.num_instances() {
            return bad("instance count mismatch");
        }
        for wb in &self.w {
            if wb.len() != kf {
                return bad("weight vector length mismatch");
            }
            if wb[0] != 1.0 {
                return bad("baseline weight must be 1");
            }
        }
        for k in 0..kf {
            if self.z[k].len() != problem.num_rows() || self.g[k].len() != problem.num_rows() {
                return bad("row count mismatch");
            }
            if k > 0 && self.count(k) == 0 {
                return bad("feature with no active row");
            }
            for row in 0..problem.num_rows() {
                if !self.z[k][row] && self.g[k][row].iter().any(|&v| v != 0.0) {
                    return bad("nonzero basis where the filter is off");
                }
            }
        }
        Ok(())
    }
}

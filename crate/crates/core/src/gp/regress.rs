use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{cross_cov, gram, KernelParams};
use crate::error::{HipError, Result};
use crate::linalg::{cholesky_jittered, log_det};
use crate::model::State;

/// Posterior mean and (latent) variance at a set of query states.
#[derive(Clone, Debug, PartialEq)]
pub struct GpPrediction {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// A zero-mean GP conditioned on noisy observations.
#[derive(Clone, Debug)]
pub struct GpRegressor {
    params: KernelParams,
    train_x: Vec<State>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    train_y: DVector<f64>,
}

impl GpRegressor {
    pub fn fit(train_x: &[State], train_y: &[f64], params: &KernelParams) -> Result<Self> {
        params.validate()?;
        if train_x.len() != train_y.len() {
            return Err(HipError::invalid(format!(
                "{} training inputs but {} targets",
                train_x.len(),
                train_y.len()
            )));
        }
        for x in train_x {
            params.check_dim(x)?;
        }
        let y = DVector::from_column_slice(train_y);
        if train_x.is_empty() {
            return Ok(GpRegressor {
                params: params.clone(),
                train_x: Vec::new(),
                chol: None,
                alpha: DVector::zeros(0),
                train_y: y,
            });
        }
        let mut k = gram(train_x, params);
        for i in 0..k.nrows() {
            k[(i, i)] += params.noise_variance;
        }
        let chol = cholesky_jittered(k, params.jitter(), "GP training covariance")?;
        let alpha = chol.solve(&y);
        Ok(GpRegressor {
            params: params.clone(),
            train_x: train_x.to_vec(),
            chol: Some(chol),
            alpha,
            train_y: y,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn mean_at(&self, x: &[f64]) -> f64 {
        self.train_x
            .iter()
            .zip(self.alpha.iter())
            .map(|(xi, a)| self.params.k(x, xi) * a)
            .sum()
    }

    pub fn means(&self, query: &[State]) -> DVector<f64> {
        if self.train_x.is_empty() {
            return DVector::zeros(query.len());
        }
        cross_cov(query, &self.train_x, &self.params) * &self.alpha
    }

    pub fn predict(&self, query: &[State]) -> Result<GpPrediction> {
        for q in query {
            self.params.check_dim(q)?;
        }
        let sf2 = self.params.signal_variance;
        let Some(chol) = &self.chol else {
            return Ok(GpPrediction {
                means: vec![0.0; query.len()],
                variances: vec![sf2; query.len()],
            });
        };
        let kq = cross_cov(&self.train_x, query, &self.params);
        let means = kq.tr_mul(&self.alpha);
        let v = chol
            .l_dirty()
            .lower_triangle()
            .solve_lower_triangular(&kq)
            .ok_or_else(|| HipError::numerical("triangular solve in GP prediction"))?;
        let variances = (0..query.len())
            .map(|j| (sf2 - v.column(j).norm_squared()).max(0.0))
            .collect();
        Ok(GpPrediction {
            means: means.iter().copied().collect(),
            variances,
        })
    }

    /// Log marginal likelihood of the training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else {
            return 0.0;
        };
        let n = self.train_y.len() as f64;
        -0.5 * self.train_y.dot(&self.alpha)
            - 0.5 * log_det(chol)
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Posterior mean and variance of a zero-mean GP at `query`.
pub fn gp_predict(
    train_x: &[State],
    train_y: &[f64],
    p: &KernelParams,
    query: &[State],
) -> Result<GpPrediction> {
    GpRegressor::fit(train_x, train_y, p)?.predict(query)
}

/// Dense `(K + noise I)` including jitter, exposed for oracles and baselines.
pub fn noisy_gram(xs: &[State], p: &KernelParams) -> DMatrix<f64> {
    let mut k = gram(xs, p);
    for i in 0..k.nrows() {
        k[(i, i)] += p.diagonal_noise();
    }
    k
}

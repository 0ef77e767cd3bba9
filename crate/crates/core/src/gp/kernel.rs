use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};
use crate::model::State;

/// Diagonal jitter added to every Gram matrix, relative to the signal variance.
pub const JITTER_RATIO: f64 = 1e-6;

/// Anisotropic squared-exponential kernel with additive observation noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let p = KernelParams {
            lengthscales,
            signal_variance,
            noise_variance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(HipError::invalid("kernel needs at least one lengthscale"));
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !self.lengthscales.iter().all(|&l| ok(l)) {
            return Err(HipError::invalid(format!(
                "lengthscales must be positive and finite: {:?}",
                self.lengthscales
            )));
        }
        if !ok(self.signal_variance) || !ok(self.noise_variance) {
            return Err(HipError::invalid(format!(
                "variances must be positive and finite: signal {} noise {}",
                self.signal_variance, self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn jitter(&self) -> f64 {
        JITTER_RATIO * self.signal_variance
    }

    /// Noise plus jitter, i.e. what actually lands on the Gram diagonal.
    pub fn diagonal_noise(&self) -> f64 {
        self.noise_variance + self.jitter()
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub fn k(&self, x1: &[f64], x2: &[f64]) -> f64 {
        debug_assert_eq!(x1.len(), self.lengthscales.len());
        debug_assert_eq!(x2.len(), self.lengthscales.len());
        let mut r2 = 0.0;
        for ((a, b), l) in x1.iter().zip(x2).zip(&self.lengthscales) {
            let u = (a - b) / l;
            r2 += u * u;
        }
        self.signal_variance * (-0.5 * r2).exp()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(HipError::invalid(format!(
                "state has dimension {}, kernel expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

pub fn kernel_eval(x1: &[f64], x2: &[f64], p: &KernelParams) -> Result<f64> {
    p.check_dim(x1)?;
    p.check_dim(x2)?;
    Ok(p.k(x1, x2))
}

/// `K(X, X)` without noise or jitter.
pub fn gram(xs: &[State], p: &KernelParams) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = p.signal_variance;
        for j in 0..i {
            let v = p.k(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K(A, B)` with shape `|A| x |B|`.
pub fn cross_cov(a: &[State], b: &[State], p: &KernelParams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| p.k(&a[i], &b[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> KernelParams {
        KernelParams::new(vec![1.0; d], 1.0, 0.1).unwrap()
    }

    #[test]
    fn zero_distance_gives_signal_variance() {
        let p = KernelParams::new(vec![0.3, 2.0], 2.5, 0.1).unwrap();
        assert_eq!(kernel_eval(&[0.4, -1.0], &[0.4, -1.0], &p).unwrap(), 2.5);
    }

    #[test]
    fn closed_form_value() {
        let v = kernel_eval(&[0.0, 0.0], &[1.0, 1.0], &unit(2)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_and_positive() {
        let p = KernelParams::new(vec![0.7, 1.9, 0.2], 1.3, 0.1).unwrap();
        let a = [0.1, -2.0, 0.05];
        let b = [1.4, 0.3, -0.1];
        let ab = kernel_eval(&a, &b, &p).unwrap();
        assert_eq!(ab, kernel_eval(&b, &a, &p).unwrap());
        assert!(ab > 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(
            kernel_eval(&[0.0], &[0.0, 1.0], &unit(2)),
            Err(HipError::InvalidInput(_))
        ));
    }

    #[test]
    fn non_positive_params_are_rejected() {
        assert!(KernelParams::new(vec![1.0, 0.0], 1.0, 0.1).is_err());
        assert!(KernelParams::new(vec![1.0], -1.0, 0.1).is_err());
        assert!(KernelParams::new(vec![1.0], 1.0, 0.0).is_err());
    }
}

use nalgebra::DVector;

use crate::error::{HipError, Result};

/// Linear action values over `cos(pi * c . s_bar)` for every multi-index
/// `c in {0..order}^d`, with `s_bar` the state scaled into `[0, 1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierValueFn {
    order: usize,
    bounds: Vec<(f64, f64)>,
    indices: Vec<Vec<f64>>,
    /// `1 / ||c||`, and 1 for the constant term.
    rate_scale: DVector<f64>,
    weights: Vec<DVector<f64>>,
}

impl FourierValueFn {
    pub fn new(order: usize, bounds: Vec<(f64, f64)>, num_actions: usize) -> Result<Self> {
        if bounds.is_empty() || num_actions == 0 {
            return Err(HipError::invalid("value function needs at least one dimension and action"));
        }
        if !bounds.iter().all(|(lo, hi)| lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(HipError::invalid("state bounds must be finite with low < high"));
        }
        let d = bounds.len();
        let n = (order + 1)
            .checked_pow(d as u32)
            .filter(|&n| n <= 1 << 20)
            .ok_or_else(|| HipError::invalid(format!("Fourier order {order} in {d} dimensions is too large")))?;
        let indices: Vec<Vec<f64>> = (0..n)
            .map(|mut i| {
                let mut c = vec![0.0; d];
                for slot in c.iter_mut().rev() {
                    *slot = (i % (order + 1)) as f64;
                    i /= order + 1;
                }
                c
            })
            .collect();
        let rate_scale = DVector::from_iterator(
            n,
            indices.iter().map(|c| {
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    1.0
                } else {
                    1.0 / norm
                }
            }),
        );
        Ok(FourierValueFn {
            order,
            bounds,
            indices,
            rate_scale,
            weights: vec![DVector::zeros(n); num_actions],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn num_actions(&self) -> usize {
        self.weights.len()
    }

    pub fn num_features(&self) -> usize {
        self.indices.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn multi_indices(&self) -> &[Vec<f64>] {
        &self.indices
    }

    pub fn rate_scale(&self) -> &DVector<f64> {
        &self.rate_scale
    }

    pub fn weights(&self, a: usize) -> &DVector<f64> {
        &self.weights[a]
    }

    pub fn weights_mut(&mut self, a: usize) -> &mut DVector<f64> {
        &mut self.weights[a]
    }

    /// Features at `s` and whether any coordinate had to be clipped.
    pub fn features(&self, s: &[f64]) -> (DVector<f64>, bool) {
        let mut clipped = false;
        let unit: Vec<f64> = s
            .iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| {
                let u = (v - lo) / (hi - lo);
                if !(0.0..=1.0).contains(&u) {
                    clipped = true;
                }
                if u.is_nan() {
                    0.0
                } else {
                    u.clamp(0.0, 1.0)
                }
            })
            .collect();
        let phi = DVector::from_iterator(
            self.indices.len(),
            self.indices.iter().map(|c| {
                let dot: f64 = c.iter().zip(&unit).map(|(a, b)| a * b).sum();
                (std::f64::consts::PI * dot).cos()
            }),
        );
        (phi, clipped)
    }

    pub fn q(&self, phi: &DVector<f64>, a: usize) -> f64 {
        self.weights[a].dot(phi)
    }

    pub fn q_values(&self, phi: &DVector<f64>) -> Vec<f64> {
        self.weights.iter().map(|w| w.dot(phi)).collect()
    }
}

pub fn fourier_features(s: &[f64], vf: &FourierValueFn) -> DVector<f64> {
    vf.features(s).0
}

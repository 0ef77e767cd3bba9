use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};

/// A state vector. Dimensions follow the environment's ordering.
pub type State = Vec<f64>;

/// One `(s, a, s', r)` interaction record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionTuple {
    pub s: State,
    pub a: usize,
    pub s_next: State,
    pub r: f64,
}

impl TransitionTuple {
    pub fn new(s: State, a: usize, s_next: State, r: f64) -> Self {
        TransitionTuple { s, a, s_next, r }
    }
}

/// Which state dimensions are angles. Angular differences are taken on the
/// circle so that a wrap from `pi` to `-pi` reads as a small step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub angular: Vec<bool>,
}

impl StateLayout {
    pub fn euclidean(dim: usize) -> Self {
        StateLayout {
            angular: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.angular.len()
    }

    pub fn delta(&self, s: &[f64], s_next: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(s_next)
            .zip(&self.angular)
            .map(|((a, b), &ang)| if ang { wrap_angle(b - a) } else { b - a })
            .collect()
    }

    pub fn delta_dim(&self, t: &TransitionTuple, d: usize) -> f64 {
        let raw = t.s_next[d] - t.s[d];
        if self.angular[d] {
            wrap_angle(raw)
        } else {
            raw
        }
    }

    pub fn advance(&self, s: &[f64], delta: &[f64]) -> State {
        s.iter()
            .zip(delta)
            .zip(&self.angular)
            .map(|((x, dx), &ang)| if ang { wrap_angle(x + dx) } else { x + dx })
            .collect()
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Hidden physical parameters of an instance, by name. Evaluation only.
pub type TrueParams = BTreeMap<String, f64>;

/// All tuples collected from one task instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceBatch {
    pub id: usize,
    pub tuples: Vec<TransitionTuple>,
    pub true_params: Option<TrueParams>,
}

impl InstanceBatch {
    pub fn new(id: usize, tuples: Vec<TransitionTuple>) -> Self {
        InstanceBatch {
            id,
            tuples,
            true_params: None,
        }
    }

    pub fn with_params(mut self, params: TrueParams) -> Self {
        self.true_params = Some(params);
        self
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn for_action(&self, a: usize) -> impl Iterator<Item = &TransitionTuple> {
        self.tuples.iter().filter(move |t| t.a == a)
    }
}

/// Latent weights of one instance, `w[0]` being the fixed baseline weight.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceWeights {
    pub instance: usize,
    w: Vec<f64>,
}

impl InstanceWeights {
    /// Builds weights from the free components `k > 1`; the baseline weight is
    /// prepended.
    pub fn from_free(instance: usize, free: &[f64]) -> Self {
        let mut w = Vec::with_capacity(free.len() + 1);
        w.push(1.0);
        w.extend_from_slice(free);
        InstanceWeights { instance, w }
    }

    pub fn new(instance: usize, w: Vec<f64>) -> Result<Self> {
        match w.first() {
            Some(1.0) => Ok(InstanceWeights { instance, w }),
            Some(_) => Err(HipError::invalid("baseline weight must be exactly 1")),
            None => Err(HipError::invalid("weights must have at least the baseline entry")),
        }
    }

    pub fn baseline(instance: usize) -> Self {
        InstanceWeights {
            instance,
            w: vec![1.0],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn free(&self) -> &[f64] {
        &self.w[1..]
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_in_half_open_interval() {
        for x in [-10.0, -PI, -3.0, 0.0, 3.0, PI, 7.0, 3.0 * PI] {
            let y = wrap_angle(x);
            assert!(y > -PI && y <= PI, "{x} -> {y}");
            assert!(((x - y) / (2.0 * PI)).fract().abs() < 1e-9 || ((x - y) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
        assert_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn angular_delta_crosses_the_cut() {
        let layout = StateLayout {
            angular: vec![true, false],
        };
        let d = layout.delta(&[3.1, 0.0], &[-3.1, 1.0]);
        assert!((d[0] - (2.0 * PI - 6.2)).abs() < 1e-12);
        assert_eq!(d[1], 1.0);
        let s = layout.advance(&[3.1, 0.0], &d);
        assert!((s[0] + 3.1).abs() < 1e-12);
    }

    #[test]
    fn weights_keep_baseline_fixed() {
        assert!(InstanceWeights::new(0, vec![0.5]).is_err());
        let w = InstanceWeights::from_free(2, &[0.3, -1.0]);
        assert_eq!(w.as_slice(), &[1.0, 0.3, -1.0]);
        assert_eq!(w.free(), &[0.3, -1.0]);
    }
}

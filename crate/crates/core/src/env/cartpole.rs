use rand::{Rng, RngCore};

use super::Environment;
use crate::error::{HipError, Result};
use crate::model::{State, StateLayout, TrueParams};

#[derive(Clone, Debug, PartialEq)]
pub struct CartpoleParams {
    /// Pole mass.
    pub m: f64,
    /// Pole length.
    pub l: f64,
    pub tau: f64,
    pub g: f64,
    pub cart_mass: f64,
    pub force: f64,
    pub theta_limit: f64,
    pub x_limit: f64,
    pub max_steps: usize,
}

impl CartpoleParams {
    pub fn with_pole(m: f64, l: f64) -> Self {
        CartpoleParams {
            m,
            l,
            ..Self::default()
        }
    }
}

impl Default for CartpoleParams {
    fn default() -> Self {
        CartpoleParams {
            m: 0.1,
            l: 0.5,
            tau: 0.02,
            g: 9.8,
            cart_mass: 1.0,
            force: 10.0,
            theta_limit: 12f64.to_radians(),
            x_limit: 2.4,
            max_steps: 300,
        }
    }
}

/// State `(x, x_dot, theta, theta_dot)`; action 0 pushes left, 1 right.
#[derive(Clone, Debug, PartialEq)]
pub struct Cartpole {
    p: CartpoleParams,
}

impl Cartpole {
    pub fn new(p: CartpoleParams) -> Result<Self> {
        let positive = [p.m, p.l, p.g, p.cart_mass, p.force, p.theta_limit, p.x_limit];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) || !(p.tau >= 0.0) {
            return Err(HipError::invalid("cartpole parameters must be positive"));
        }
        Ok(Cartpole { p })
    }

    pub fn params_ref(&self) -> &CartpoleParams {
        &self.p
    }

    /// One Euler step under applied force `f`. Every right-hand side reads
    /// the state at time t.
    pub fn euler(&self, s: &[f64], f: f64) -> State {
        let p = &self.p;
        let (x, xd, th, thd) = (s[0], s[1], s[2], s[3]);
        let big_m = p.cart_mass + p.m;
        let (sin, cos) = th.sin_cos();
        let v = (f + p.m * p.l * thd * thd * sin) / big_m;
        let thdd = (p.g * sin - v * cos) / (p.l * (4.0 / 3.0 - p.m * cos * cos / big_m));
        vec![
            x + p.tau * xd,
            xd + p.tau * (v - p.m * p.l * thdd * cos / big_m),
            th + p.tau * thd,
            thd + p.tau * thdd,
        ]
    }
}

impl Environment for Cartpole {
    fn num_actions(&self) -> usize {
        2
    }

    fn layout(&self) -> StateLayout {
        StateLayout::euclidean(4)
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![
            (-self.p.x_limit, self.p.x_limit),
            (-3.0, 3.0),
            (-self.p.theta_limit, self.p.theta_limit),
            (-3.5, 3.5),
        ]
    }

    fn max_steps(&self) -> usize {
        self.p.max_steps
    }

    fn reset(&self, rng: &mut dyn RngCore) -> State {
        (0..4).map(|_| rng.random_range(-0.05..0.05)).collect()
    }

    fn transition(&self, s: &[f64], a: usize) -> State {
        let f = if a == 0 { -self.p.force } else { self.p.force };
        self.euler(s, f)
    }

    /// +1 per surviving step, 0 on the step that fails.
    fn outcome(&self, s_next: &[f64]) -> (f64, bool) {
        let failed = !(s_next[0].abs() <= self.p.x_limit && s_next[2].abs() <= self.p.theta_limit);
        (if failed { 0.0 } else { 1.0 }, failed)
    }

    fn params(&self) -> TrueParams {
        [("m".to_string(), self.p.m), ("l".to_string(), self.p.l)].into_iter().collect()
    }
}

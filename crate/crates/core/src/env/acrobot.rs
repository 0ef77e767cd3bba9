use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::Environment;
use crate::error::{HipError, Result};
use crate::model::{wrap_angle, State, StateLayout, TrueParams};

#[derive(Clone, Debug, PartialEq)]
pub struct AcrobotParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    /// Distance from each joint to its link's centre of mass.
    pub lc1: f64,
    pub lc2: f64,
    /// Moments of inertia about the centres of mass.
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
    pub torque: f64,
    pub tau: f64,
    pub substeps: usize,
    pub max_vel1: f64,
    pub max_vel2: f64,
    pub max_steps: usize,
}

impl AcrobotParams {
    pub fn with_masses(m1: f64, m2: f64) -> Self {
        AcrobotParams {
            m1,
            m2,
            ..Self::default()
        }
    }
}

impl Default for AcrobotParams {
    fn default() -> Self {
        AcrobotParams {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            lc1: 0.5,
            lc2: 0.5,
            i1: 1.0,
            i2: 1.0,
            g: 9.8,
            torque: 1.0,
            tau: 0.2,
            substeps: 4,
            max_vel1: 4.0 * PI,
            max_vel2: 9.0 * PI,
            max_steps: 500,
        }
    }
}

/// Two-link underactuated pendulum, torque on the middle joint. State
/// `(theta1, theta1_dot, theta2, theta2_dot)` with both angles zero when
/// hanging straight down; actions 0, 1, 2 apply -1, 0, +1 torque units.
#[derive(Clone, Debug, PartialEq)]
pub struct Acrobot {
    p: AcrobotParams,
}

impl Acrobot {
    pub fn new(p: AcrobotParams) -> Result<Self> {
        let positive = [p.m1, p.m2, p.l1, p.l2, p.lc1, p.lc2, p.g, p.max_vel1, p.max_vel2];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0)
            || !(p.i1 >= 0.0 && p.i2 >= 0.0 && p.tau >= 0.0)
            || p.substeps == 0
        {
            return Err(HipError::invalid("acrobot parameters must be positive"));
        }
        Ok(Acrobot { p })
    }

    pub fn params_ref(&self) -> &AcrobotParams {
        &self.p
    }

    /// Angular accelerations under joint torque `u`.
    pub fn accelerations(&self, s: &[f64], u: f64) -> (f64, f64) {
        let p = &self.p;
        let (t1, d1v, t2, d2v) = (s[0], s[1], s[2], s[3]);
        let d1 = p.m1 * p.lc1 * p.lc1
            + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * t2.cos())
            + p.i1
            + p.i2;
        let d2 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * t2.cos()) + p.i2;
        let phi2 = p.m2 * p.lc2 * p.g * (t1 + t2 - PI / 2.0).cos();
        let phi1 = -p.m2 * p.l1 * p.lc2 * d2v * d2v * t2.sin()
            - 2.0 * p.m2 * p.l1 * p.lc2 * d2v * d1v * t2.sin()
            + (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * (t1 - PI / 2.0).cos()
            + phi2;
        let acc2 = (u + d2 / d1 * phi1 - p.m2 * p.l1 * p.lc2 * d1v * d1v * t2.sin() - phi2)
            / (p.m2 * p.lc2 * p.lc2 + p.i2 - d2 * d2 / d1);
        let acc1 = -(d2 * acc2 + phi1) / d1;
        (acc1, acc2)
    }

    /// Integrate for one control interval with `substeps` Euler steps.
    /// Velocities are clamped after each substep; angles are wrapped at the end.
    pub fn integrate(&self, s: &[f64], u: f64, substeps: usize) -> State {
        let p = &self.p;
        let dt = p.tau / substeps as f64;
        let mut x = [s[0], s[1], s[2], s[3]];
        for _ in 0..substeps {
            let (a1, a2) = self.accelerations(&x, u);
            x = [
                x[0] + dt * x[1],
                (x[1] + dt * a1).clamp(-p.max_vel1, p.max_vel1),
                x[2] + dt * x[3],
                (x[3] + dt * a2).clamp(-p.max_vel2, p.max_vel2),
            ];
        }
        vec![wrap_angle(x[0]), x[1], wrap_angle(x[2]), x[3]]
    }

    /// Total mechanical energy, zero potential at the pivot height.
    pub fn energy(&self, s: &[f64]) -> f64 {
        let p = &self.p;
        let (t1, w1, t2, w2) = (s[0], s[1], s[2], s[3]);
        let w12 = w1 + w2;
        let kinetic = 0.5 * (p.m1 * p.lc1 * p.lc1 + p.i1) * w1 * w1
            + 0.5
                * p.m2
                * (p.l1 * p.l1 * w1 * w1 + p.lc2 * p.lc2 * w12 * w12 + 2.0 * p.l1 * p.lc2 * w1 * w12 * t2.cos())
            + 0.5 * p.i2 * w12 * w12;
        let y1 = -p.lc1 * t1.cos();
        let y2 = -p.l1 * t1.cos() - p.lc2 * (t1 + t2).cos();
        kinetic + p.g * (p.m1 * y1 + p.m2 * y2)
    }

    /// Tip height above the pivot in units of link length.
    pub fn tip_height(s: &[f64]) -> f64 {
        -s[0].cos() - (s[0] + s[2]).cos()
    }
}

impl Environment for Acrobot {
    fn num_actions(&self) -> usize {
        3
    }

    fn layout(&self) -> StateLayout {
        StateLayout {
            angular: vec![true, false, true, false],
        }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![
            (-PI, PI),
            (-self.p.max_vel1, self.p.max_vel1),
            (-PI, PI),
            (-self.p.max_vel2, self.p.max_vel2),
        ]
    }

    fn max_steps(&self) -> usize {
        self.p.max_steps
    }

    fn reset(&self, rng: &mut dyn RngCore) -> State {
        (0..4).map(|_| rng.random_range(-0.1..0.1)).collect()
    }

    fn transition(&self, s: &[f64], a: usize) -> State {
        let u = (a as f64 - 1.0) * self.p.torque;
        self.integrate(s, u, self.p.substeps)
    }

    /// -1 per step; the episode ends once the tip clears one link length.
    fn outcome(&self, s_next: &[f64]) -> (f64, bool) {
        (-1.0, Self::tip_height(s_next) > 1.0)
    }

    fn constrain(&self, s: State) -> State {
        vec![
            wrap_angle(s[0]),
            s[1].clamp(-self.p.max_vel1, self.p.max_vel1),
            wrap_angle(s[2]),
            s[3].clamp(-self.p.max_vel2, self.p.max_vel2),
        ]
    }

    fn params(&self) -> TrueParams {
        [("m1".to_string(), self.p.m1), ("m2".to_string(), self.p.m2)].into_iter().collect()
    }
}

//! Ground-truth simulators and the instance grids they are drawn from.

mod acrobot;
mod cartpole;
mod trajectory;

pub use acrobot::{Acrobot, AcrobotParams};
pub use cartpole::{Cartpole, CartpoleParams};
pub use trajectory::{batches_from_rows, read_trajectories, write_trajectories, TrajectoryRow};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{HipError, Result};
use crate::model::{State, StateLayout, TrueParams};

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub s_next: State,
    pub reward: f64,
    pub done: bool,
}

/// A discrete-action task. Dynamics and rewards are split so a learned model
/// can reuse the reward and termination rule of the real task.
pub trait Environment {
    fn num_actions(&self) -> usize;

    fn layout(&self) -> StateLayout;

    /// Box used to normalise states for value features.
    fn bounds(&self) -> Vec<(f64, f64)>;

    fn max_steps(&self) -> usize;

    fn reset(&self, rng: &mut dyn RngCore) -> State;

    /// Deterministic next state.
    fn transition(&self, s: &[f64], a: usize) -> State;

    /// Reward and termination for arriving in `s_next`.
    fn outcome(&self, s_next: &[f64]) -> (f64, bool);

    fn params(&self) -> TrueParams;

    /// Project a predicted state onto the reachable set (wrapped angles,
    /// clamped velocities). Identity by default.
    fn constrain(&self, s: State) -> State {
        s
    }

    fn step(&self, s: &[f64], a: usize) -> Result<Step> {
        let dim = self.layout().dim();
        if s.len() != dim {
            return Err(HipError::invalid(format!("state has dimension {}, expected {dim}", s.len())));
        }
        if a >= self.num_actions() {
            return Err(HipError::invalid(format!("action {a} outside 0..{}", self.num_actions())));
        }
        let s_next = self.transition(s, a);
        let (reward, done) = self.outcome(&s_next);
        Ok(Step { s_next, reward, done })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Cartpole,
    Acrobot,
}

impl Domain {
    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            Domain::Cartpole => ["m", "l"],
            Domain::Acrobot => ["m1", "m2"],
        }
    }

    /// Training settings, in order. Cartpole repeats (.3, .4).
    pub fn training_settings(self) -> Vec<[f64; 2]> {
        match self {
            Domain::Cartpole => vec![
                [0.1, 0.4],
                [0.3, 0.4],
                [0.15, 0.45],
                [0.2, 0.55],
                [0.25, 0.5],
                [0.3, 0.4],
                [0.3, 0.6],
            ],
            Domain::Acrobot => vec![
                [0.7, 0.7],
                [0.7, 1.3],
                [0.9, 0.7],
                [0.9, 1.1],
                [1.1, 0.9],
                [1.1, 1.3],
                [1.3, 0.7],
                [1.3, 1.3],
            ],
        }
    }

    /// Full evaluation grid: 25 cartpole settings, 16 acrobot settings.
    pub fn evaluation_grid(self) -> Vec<[f64; 2]> {
        let (first, second): (&[f64], &[f64]) = match self {
            Domain::Cartpole => (&[0.1, 0.15, 0.2, 0.25, 0.3], &[0.4, 0.45, 0.5, 0.55, 0.6]),
            Domain::Acrobot => (&[0.7, 0.9, 1.1, 1.3], &[0.7, 0.9, 1.1, 1.3]),
        };
        first.iter().flat_map(|&p| second.iter().map(move |&q| [p, q])).collect()
    }

    pub fn make(self, setting: [f64; 2]) -> Result<Env> {
        match self {
            Domain::Cartpole => Ok(Env::Cartpole(Cartpole::new(CartpoleParams::with_pole(setting[0], setting[1]))?)),
            Domain::Acrobot => Ok(Env::Acrobot(Acrobot::new(AcrobotParams::with_masses(setting[0], setting[1]))?)),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Cartpole => "cartpole",
            Domain::Acrobot => "acrobot",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cartpole" => Ok(Domain::Cartpole),
            "acrobot" => Ok(Domain::Acrobot),
            other => Err(format!("unknown domain `{other}`, expected cartpole or acrobot")),
        }
    }
}

/// Uniform draw from a parameter grid.
pub fn sample_instance<R: Rng + ?Sized>(grid: &[[f64; 2]], rng: &mut R) -> Result<[f64; 2]> {
    if grid.is_empty() {
        return Err(HipError::invalid("parameter grid is empty"));
    }
    Ok(grid[rng.random_range(0..grid.len())])
}

/// Either simulator behind one concrete type.
#[derive(Clone, Debug, PartialEq)]
pub enum Env {
    Cartpole(Cartpole),
    Acrobot(Acrobot),
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Env::Cartpole($e) => $body,
            Env::Acrobot($e) => $body,
        }
    };
}

impl Environment for Env {
    fn num_actions(&self) -> usize {
        dispatch!(self, e => e.num_actions())
    }

    fn layout(&self) -> StateLayout {
        dispatch!(self, e => e.layout())
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        dispatch!(self, e => e.bounds())
    }

    fn max_steps(&self) -> usize {
        dispatch!(self, e => e.max_steps())
    }

    fn reset(&self, rng: &mut dyn RngCore) -> State {
        dispatch!(self, e => e.reset(rng))
    }

    fn transition(&self, s: &[f64], a: usize) -> State {
        dispatch!(self, e => e.transition(s, a))
    }

    fn outcome(&self, s_next: &[f64]) -> (f64, bool) {
        dispatch!(self, e => e.outcome(s_next))
    }

    fn params(&self) -> TrueParams {
        dispatch!(self, e => e.params())
    }

    fn constrain(&self, s: State) -> State {
        dispatch!(self, e => e.constrain(s))
    }
}

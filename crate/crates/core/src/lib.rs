//! Learning and using Hidden-Parameter MDP dynamics.
//!
//! A family of related tasks shares its states, actions and rewards; only the
//! dynamics differ, through a few per-instance latent weights. The model
//! explains each state change as a filtered, weighted sum of GP basis
//! functions,
//!
//! ```text
//! s'_d - s_d = sum_k z_kad * w_kb * f_kad(s) + eps,   eps ~ N(0, s2_ad)
//! ```
//!
//! with an Indian-buffet prior on the binary filter `z`. [`gibbs`] fits the
//! shared structure from batches of several instances, [`filter`] identifies
//! a new instance online, and [`control`] plans with the identified model.

pub mod control;
pub mod env;
pub mod error;
pub mod filter;
pub mod gibbs;
pub mod gp;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod synthetic;

pub use error::{HipError, Result};
pub use model::{InstanceBatch, InstanceWeights, LatentDynamicsModel, State, StateLayout, TransitionTuple};

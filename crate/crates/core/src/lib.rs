//! Safety-index constrained soft actor-critic on a 2-D point-mass navigation task.
//!
//! The crate is organised bottom-up: [`nn`] (dense networks, Adam, gradient
//! checking), [`env`] (double-integrator arena with circular hazards),
//! [`safety`] (safety index, transition cost, feasibility), [`learner`]
//! (losses and the training loop) and [`harness`] (config, metrics,
//! checkpoints, evaluation and checks behind the CLI).

pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod nn;
pub mod safety;

pub use error::{Error, Result};

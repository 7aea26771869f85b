//! Configuration, metrics, checkpoints, evaluation and verification checks.

pub mod check;
pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod metrics;
pub mod run;

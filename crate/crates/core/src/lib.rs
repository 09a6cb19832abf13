//! Algorithm selection for continuous black-box optimization from short
//! probing trajectories.
//!
//! The crate regenerates solver run data on a BBOB-style suite, turns the
//! first generations of each run into selector inputs (raw trajectories,
//! time-series features, landscape features), and evaluates tree-ensemble
//! selectors under leave-one-instance-out cross-validation.

pub mod bbob;
pub mod classifiers;
pub mod config;
pub mod ela_features;
pub mod error;
pub mod experiments;
pub mod features;
pub mod pipeline;
pub mod rng;
pub mod solvers;
pub mod trajectory;
pub mod ts_features;

pub use error::{Error, Result};

//! Two-tower recommender systems: training, classical baselines, a seeded
//! synthetic benchmark, and computable forms of the approximation and
//! convergence bounds for deep two-tower models.

pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod synthgen;
pub mod theory;
pub mod twotower;

pub use error::{Error, Result};

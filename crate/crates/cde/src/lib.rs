//! Conditional density estimation: neural mixture estimators (MDN, KMN)
//! trained with noise regularization, kernel baselines (CKDE, NKDE,
//! LSCDE), closed-form density simulators, and an evaluation pipeline
//! built around Hellinger distance, held-out log-likelihood, and moment
//! errors.
//!
//! Everything is deterministic given seeds: data generation, k-means
//! initialization, training minibatch order, and Monte Carlo evaluation
//! all flow from explicit `u64` seeds through counter-based derivation
//! ([`seed::derive_seed`]), so an entire benchmark run is reproducible
//! byte for byte regardless of thread count.

pub mod data;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod gmm;
pub mod harness;
pub mod kmeans;
pub mod linalg;
pub mod nn;
pub mod parallel;
pub mod quadrature;
pub mod seed;
pub mod simulators;
pub mod stats;

pub use error::{CdeError, Result};

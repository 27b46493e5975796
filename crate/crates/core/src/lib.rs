//! Relational inference for graph dynamical systems.
//!
//! The crate recovers the interaction graph of a dynamical system from
//! sampled trajectories by jointly fitting a one-step message-passing
//! surrogate and a polynomial-filter surrogate that share edge logits.
//! It also ships the simulators, statistical baselines, evaluation metric
//! and the spectral analyses used to study effective interaction graphs.

pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod model;
pub mod numcore;
pub mod rng;
pub mod scores;

/// Version string embedded in every written artifact.
pub const VERSION: &str = concat!("gdp ", env!("CARGO_PKG_VERSION"));

pub use error::{GdpError, Result};
pub use graphs::Graph;
pub use scores::ScoreMatrix;

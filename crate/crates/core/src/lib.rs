//! Adaptive random-walk Metropolis sampling over hierarchical model graphs,
//! with an automated search over parameter blockings that maximizes
//! effective samples per second.

pub mod autoblock;
pub mod bench;
pub mod clustering;
pub mod diagnostics;
mod error;
pub mod example_models;
pub mod model;
pub mod sampler;

pub use error::{AutoblockError, ClusterError, DiagnosticsError, ModelError, PlanError};
pub use model::{ModelGraph, ModelSpec, NodeId};
pub use sampler::{run_mcmc, ChainMatrix, SamplerPlan};

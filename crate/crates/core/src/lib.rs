//! Generation and evaluation of synthetic netflow datasets.
//!
//! The pipeline fits three models to a reference dataset — a stochastic
//! Kronecker initiator for the node topology, per-column Gaussian-mixture
//! encoders plus a category-conditional sampler for the flow features, and a
//! boosted-tree scorer that overlays sampled features onto sampled structure —
//! then emits ensembles of synthetic dynamic multigraphs and scores them with
//! accuracy/diversity sphere metrics against the reference.

pub mod alignment;
pub mod baselines;
pub mod boost;
pub mod error;
pub mod features;
pub mod gmm;
pub mod kronecker;
pub mod metrics;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};

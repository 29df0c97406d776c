//! Attentive multi-persona collaborative filtering.
//!
//! Users are represented by several persona vectors that are mixed per item
//! by an attention step. The crate also carries the evaluation machinery used
//! to judge the model: leave-one-out ranking metrics, a taste-distribution
//! distance computed in a model-neutral PCA/K-means space, an inference-only
//! clustering baseline and a persona-level explanation report.

pub mod aisp;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod explain;
pub mod kmeans;
pub mod model;
pub mod pca;
pub mod rank_eval;
pub mod scoring;
pub mod store;
pub mod tdd;
pub mod trainer;

pub use error::{Error, Result};

//! Uncertainty-aware reward models over fixed preference embeddings.
//!
//! The crate is organised around five modules:
//!
//! - [`corpus`]: preference data model, line-delimited dataset files,
//!   symmetrization and a synthetic Bradley-Terry generator with known
//!   ground truth.
//! - [`heads`]: MLP-head ensembles, low-rank adapter ensembles, MC-dropout
//!   heads and the Bayesian linear head with a Laplace posterior.
//! - [`optim`]: preference losses, exact gradients, Adam with a cosine
//!   warmup schedule and a Newton solver for the MAP of the linear head.
//! - [`metrics`]: preference-probability bounds, win rate, the
//!   confident/unconfident confusion counts, the ranking score and the
//!   calibration errors (ECE, ELCE, EUCE, EBCE).
//! - [`harness`]: sweeps, threshold-then-rank selection, category
//!   aggregation, report export and the command line front end.
//!
//! Data-parallel inner loops go through [`par::Exec`]; with the `parallel`
//! feature disabled every loop runs sequentially and produces bit-identical
//! results.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod heads;
pub mod metrics;
pub mod numeric;
pub mod optim;
pub mod par;
pub mod rng;

pub use error::{Error, Result};

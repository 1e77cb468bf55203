//! Data-adaptive energy-distance classifiers for high-dimensional,
//! low-sample-size (HDLSS) problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`angular`]: angular-distance kernels and their pooled-sample estimators.
//! - [`stats`]: pooled training statistics and per-point discriminants.
//! - [`classifiers`]: the four binary rules, the one-vs-one ensemble and the
//!   1-NN / Bayes baselines.
//! - [`theory`]: closed-form limits of the statistics as `d` grows.
//! - [`distributions`]: samplers and densities for the simulation families.
//! - [`experiments`]: the seeded Monte Carlo harness.
//! - [`dataio`]: CSV ingestion, stratified splits, model and result files.
//! - [`cli`]: the `hdlss` command line.

pub mod angular;
pub mod classifiers;
pub mod cli;
pub mod dataio;
pub mod distributions;
mod error;
pub mod experiments;
pub mod rng;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};

//! Off-policy soft actor-critic training with pluggable ensemble Q-value
//! aggregation.
//!
//! The crate bundles everything needed to run and evaluate experiments
//! without external simulators:
//!
//! - [`approx`]: multilayer perceptrons with CReLU activations, reverse-mode
//!   gradients, and Adam.
//! - [`env`]: two deterministic continuous-control tasks with rewards in
//!   `[0, 1]`.
//! - [`replay`]: a fixed-capacity transition ring buffer with uniform
//!   sampling.
//! - [`policy`]: a tanh-squashed Gaussian actor with automatic entropy
//!   temperature tuning.
//! - [`ensemble`]: critic ensembles, delayed targets, the disagreement
//!   metric, and the aggregation rules (min-all, subset-min, mean,
//!   directional).
//! - [`dea`]: the learnable directional aggregation parameters and their
//!   sign-based updates.
//! - [`trainer`]: the full training loop, seed sweeps, and run artifacts.
//! - [`metrics`]: the evaluation protocol plus IQM, AULC, and average-rank
//!   summaries.
//! - [`config`] / [`report`]: the TOML run configuration and the CSV/SVG
//!   report generator behind the `dea` command-line tool.

pub mod approx;
pub mod artifacts;
pub mod config;
pub mod dea;
pub mod ensemble;
pub mod env;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod replay;
pub mod report;
pub mod rngstream;
pub mod svg;
pub mod trainer;

pub use error::{ConfigError, ReportError, TrainError};

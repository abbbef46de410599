//! Risk-averse Bayesian optimization under heteroscedastic noise.
//!
//! The crate provides heteroscedastic GP regression, a GP model of the noise
//! variance learned from repeated evaluations, mean-variance acquisition
//! functions, the RAHBO loop with its baselines, synthetic benchmarks and an
//! experiment harness that writes plot-ready CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod acquisition;
pub mod algorithms;
pub mod benchmarks;
pub mod config;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod metrics;
pub mod sobol;
pub mod variance;

pub use config::{Algorithm, ExperimentConfig, ReportRule};
pub use error::{Error, Result};

//! Bayesian inference for Markov renewal processes with Weibull holding times.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`catalog`] turns a dated event catalog into a state/holding-time
//!    sequence with a right-censored tail, and splits it into a historical
//!    prefix and a current sample.
//! 2. [`prior`] elicits a Dirichlet prior for each transition-matrix row and a
//!    (shape, scale) prior for every transition from the historical prefix.
//! 3. [`sampler`] runs an exact Gibbs sampler over the transition matrix,
//!    Weibull shapes and scales, the unobserved state following the censored
//!    tail, and the fictitious quantiles of transitions with no history.
//! 4. [`summaries`] reduces the chains to posterior and predictive summaries.
//! 5. [`forecast`] computes cross state-probabilities and runs backtests.
//!
//! [`simulate`] generates synthetic sequences from known parameters.

pub mod ars;
pub mod catalog;
pub mod error;
pub mod forecast;
pub mod matrix;
pub mod prior;
pub mod sampler;
pub mod simulate;
pub mod stats;
pub mod summaries;
pub mod weibull;

pub use error::{Error, Result};
pub use matrix::Matrix;

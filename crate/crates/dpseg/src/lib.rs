// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bayesian change point detection for piecewise autoregressive time series.
//!
//! A series is cut into contiguous segments by an unknown number of change
//! points. Each segment follows a linear-in-parameters model (intercept plus
//! autoregressive lags) whose coefficients are drawn from a segment class;
//! classes are shared across segments through a Dirichlet-process prior, so
//! recurring regimes pool their data instead of being re-estimated from
//! scratch. Coefficients and noise variances are conjugate and integrated out
//! analytically, leaving a collapsed posterior over change point positions,
//! their number, and the class labels. Inference combines:
//!
//! * a Gibbs sweep over class parameters and labels (auxiliary-variable
//!   method for the non-conjugate new-class case), and
//! * birth / death / relocation Metropolis-Hastings moves on the change
//!   point configuration.
//!
//! The `baseline` mode pins every segment to its own class, which recovers
//! the classical independent-segment sampler; the `dp` mode runs the full
//! pooled model. [`oracle`] holds slow, independent reference computations
//! (exhaustive enumeration and numerical quadrature) used to validate the
//! closed forms and the samplers.

#![forbid(unsafe_code)]

pub mod dist;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod marginal;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

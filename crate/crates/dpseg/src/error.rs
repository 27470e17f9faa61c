// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by the whole crate.

use nalgebra::DMatrix;

/// Errors produced by model construction, sampling, and the oracles.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must be symmetric positive definite failed its
    /// Cholesky factorization. The offending matrix is attached so failing
    /// states can be reported verbatim.
    #[error("numerical domain error in {context}: matrix is not positive definite")]
    NotPositiveDefinite {
        context: &'static str,
        matrix: DMatrix<f64>,
    },

    /// A log-domain computation produced a non-finite value where a finite
    /// one is required (e.g. every categorical weight is -inf).
    #[error("numerical domain error in {context}: {message}")]
    NumericalDomain {
        context: &'static str,
        message: String,
    },

    /// A chain aborted mid-run. Carries the iteration index and a plain-text
    /// dump of the state that triggered the failure.
    #[error("chain failed at iteration {iteration}: {source}")]
    ChainFailure {
        iteration: usize,
        state_dump: String,
        #[source]
        source: Box<Error>,
    },

    /// An oracle refinement did not reach its accuracy target.
    #[error("oracle did not converge in {context}: error estimate {error_estimate:e}")]
    OracleNonconvergence {
        context: &'static str,
        error_estimate: f64,
    },
}

impl Error {
    /// Shorthand for [`Error::InvalidInput`].
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

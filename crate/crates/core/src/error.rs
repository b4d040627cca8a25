//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical routines, solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root/minimizer bracket could not be established.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// An iteration failed to converge; carries the best iterate seen.
    #[error("convergence failure after {iterations} iterations ({context}); best iterate {best:e}")]
    Convergence {
        context: String,
        iterations: usize,
        best: f64,
    },

    /// An iterative solver diverged.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Matrix rank deficiency where full rank is required.
    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    /// A linear-algebra subproblem failed numerically.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Combinatorial size guard tripped (brute-force oracle).
    #[error("size guard: {0}")]
    SizeGuard(String),

    /// Invalid ensemble or grid specification.
    #[error("spec error: {0}")]
    Spec(String),

    /// Precondition violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed persisted data.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

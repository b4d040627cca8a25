//! Analytic weak-threshold curves and sparse-recovery solvers for random
//! under-determined linear systems `Ax = y`.
//!
//! The crate has four layers:
//!
//! * [`special`] — scalar special functions plus 1-D root finding and
//!   minimization,
//! * [`thresholds`] — the weak threshold curve `beta_w(alpha)` computed three
//!   independent ways (polytope angle exponents, the closed-form erfinv
//!   characterization, and AMP state evolution) with an equivalence certifier,
//! * [`solvers`] — AMP, basis pursuit and OMP, plus a brute-force l1 oracle
//!   and a dual-certificate optimality check,
//! * [`harness`] — seeded Gaussian ensembles, Monte Carlo phase diagrams,
//!   empirical threshold estimation and CSV/JSON persistence.

pub mod error;
pub mod harness;
pub mod solvers;
pub mod special;
pub mod thresholds;

pub use error::{Error, Result};
pub use harness::{
    EmpiricalThreshold, EnsembleSpec, NonzeroLaw, PhaseCell, PhaseDiagram, SolverKind,
};
pub use solvers::{ProblemInstance, RecoveryOutcome, SolverOptions};
pub use special::{Bracket, Tolerance};
pub use thresholds::{
    AngleExponents, EquivalenceReport, InternalAngleParams, Method, ThresholdCurve, ThresholdPoint,
};

/// Tool version embedded in persisted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

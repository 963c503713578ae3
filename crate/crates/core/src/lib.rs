//! Christoffel-weighted least-squares approximation from random point samples.
//!
//! The crate builds approximations of a function `u` in an `n`-dimensional
//! space `V_n` from pointwise evaluations at randomly drawn locations:
//!
//! 1. points are drawn i.i.d. from the optimal density `(1/n) Σ |L_j|²` and
//!    reweighted by the Christoffel weight `w(x) = n / Σ |L_j(x)|²`
//!    ([`sampling`]),
//! 2. the draw is conditioned on the empirical Gram matrix staying within
//!    spectral distance 1/2 of the identity ([`gramian`]),
//! 3. the conditioned sample is optionally shrunk to `O(n)` points by a
//!    verified spectral partition and random subsample, a twice-barrier
//!    greedy selection, or greedy point removal ([`sparsify`]),
//! 4. `u` is evaluated at the surviving points only and reconstructed by
//!    weighted least squares; a Monte Carlo harness estimates the expected
//!    squared error against the best-approximation error `e_n(u)`
//!    ([`estimator`]).
//!
//! Built-in spaces live in [`spaces`]: normalized Legendre polynomials on
//! `[-1,1]` with `dμ = dx/2`, a real Fourier basis on the circle `[0,1)`,
//! and piecewise constants on `[0,1)`.

pub mod estimator;
pub mod gramian;
pub mod linalg;
pub mod sampling;
pub mod spaces;
pub mod sparsify;
pub mod targets;

pub use estimator::{
    monte_carlo, run_trial, stage_sample, weighted_least_squares, MonteCarloReport, Pipeline,
    PipelineOptions, StagedSample, TrialOutcome, TrialReport,
};
pub use gramian::GramMatrix;
pub use sampling::{minimal_budget, RngStream, Sample};
pub use spaces::{BasisId, DomainId, FunctionSpace, TargetFunction};
pub use sparsify::{PartitionResult, SplitOptions, SplitSchedule, SplitStrategy};

use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} outside domain {domain:?}")]
    OutsideDomain { x: f64, domain: spaces::DomainId },

    #[error("christoffel denominator vanished at x = {x}")]
    SingularPoint { x: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rejection sampler stalled after {cap} proposals")]
    SamplingStall { cap: u64 },

    #[error("conditioning failed after {max_redraws} redraws (last spectral distance {last_distance:.6})")]
    ConditioningFailure {
        max_redraws: usize,
        last_distance: f64,
    },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("matrix not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix not positive semi-definite (lambda_min {lambda_min:.3e})")]
    NotPositiveSemiDefinite { lambda_min: f64 },

    #[error("singular normal equations (lambda_min {lambda_min:.3e})")]
    SingularSystem { lambda_min: f64 },

    #[error("reconstruction failed: singular Gram matrix (lambda_min {lambda_min:.3e})")]
    ReconstructionFailure { lambda_min: f64 },

    #[error("exhaustive split limited to {limit} vectors, got {size}")]
    ExhaustiveTooLarge { size: usize, limit: usize },

    #[error(
        "split search failed at level {level}, set {set_index}, after {candidates} candidates"
    )]
    SplitSearchFailure {
        level: usize,
        set_index: usize,
        candidates: usize,
    },

    #[error("sparsification barrier step {step} infeasible (best gap {gap:.3e})")]
    SparsificationFailure { step: usize, gap: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent data: {0}")]
    Inconsistency(String),

    #[error("all {trials} trials failed; last failure: {last_reason}")]
    AllTrialsFailed { trials: usize, last_reason: String },

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

//! Entropic optimal transport with robust analytic derivatives.
//!
//! This crate computes entropy-regularized optimal transport (EOT) and
//! Sinkhorn distances between weighted point clouds, together with
//! closed-form first- and second-order derivatives of those distances with
//! respect to the source points. The derivative linear systems share a
//! singular symmetric block matrix (the H-matrix); its spectrum decides
//! whether the solves are well-posed, so the crate ships a spectral
//! analysis toolkit and a truncated-eigendecomposition solver that keeps
//! the computations stable even when the regularization strength is small.
//!
//! On top of the derivatives sits a two-stage optimizer (minibatch SGD
//! until the parameter Hessian turns positive definite, then relaxed
//! Newton steps) for shuffled regression and point-cloud registration,
//! where source/target correspondence is unknown.
//!
//! Modules:
//! - [`tensor`]: dense containers, symmetric eigendecomposition, truncated solve
//! - [`sinkhorn`]: cost matrices and the log-domain Sinkhorn solver
//! - [`diff`]: gradients and Hessians of the transport distances
//! - [`spectral`]: H-matrix spectrum, condition-number and perturbation bounds
//! - [`optimizer`]: two-stage SGD/Newton fitting and problem generators
//! - [`oracle`]: finite-difference and brute-force pseudo-inverse checks

use thiserror::Error;

pub mod diff;
pub mod optimizer;
pub mod oracle;
pub mod seeding;
pub mod sinkhorn;
pub mod spectral;
pub mod tensor;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Array dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An input violates a documented precondition.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A matrix has no usable spectrum (for instance lambda_1 <= 0).
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    /// Truncation removed every eigenvalue.
    #[error("empty retained spectrum at alpha = {0}")]
    RankZero(f64),

    /// A floating-point computation produced NaN or infinity.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The perturbation-bound hypothesis t < 1 does not hold.
    #[error("perturbation bound inapplicable: t = {0} >= 1")]
    BoundInapplicable(f64),

    /// Input exceeds a documented size cap.
    #[error("size cap exceeded: {0} > {1}")]
    SizeCap(usize, usize),

    /// A point-cloud file could not be parsed.
    #[error("malformed point-cloud file: {0}")]
    MalformedFile(String),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

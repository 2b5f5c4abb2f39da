//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the algebra layers.
///
/// The variants are deliberately coarse: callers distinguish *classes* of
/// failure (bad input, undecidable request, internal verification), while the
/// payload strings carry the specific operator or variable involved.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Division by the zero rational function or zero polynomial.
    #[error("division by zero")]
    DivisionByZero,

    /// Division by the zero operator.
    #[error("division by the zero operator")]
    ZeroOperator,

    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A polynomial that was required to be univariate was not.
    #[error("expected a univariate polynomial, found variables {0}")]
    NotUnivariate(String),

    /// Differentiating in a direction the expression class cannot represent,
    /// e.g. `d/dy` of a formal antiderivative in `x` whose integrand
    /// depends on `y`.
    #[error("underdetermined derivative: d/d{var} of {node}")]
    UnderdeterminedDerivative { var: String, node: String },

    /// A product of two terms that both carry arbitrary-function parts.
    #[error("nonlinear expression: product of arbitrary-function terms")]
    NonlinearExpression,

    /// The operator is not in second-order hyperbolic normal form.
    #[error("not reducible to hyperbolic normal form: {0}")]
    NotHyperbolic(String),

    /// A Laplace step was requested in a direction whose driving invariant
    /// vanishes (the operator already factors there).
    #[error("vanishing driving invariant: {0}")]
    VanishingInvariant(String),

    /// A degree bound exceeded its configured cap.
    #[error("degree bound {bound} exceeds cap {cap}")]
    BoundOverflow { bound: i64, cap: i64 },

    /// The computation reached a shape outside the supported fragment.
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    /// A claimed factorization does not multiply back to the operator.
    #[error("inconsistent factorization: product does not equal the operator")]
    FactorizationMismatch,

    /// A repeated (proportional) linear factor where distinct characteristics
    /// are required.
    #[error("repeated factor unsupported: {0}")]
    RepeatedFactor(String),

    /// The candidate first-order coefficient fails its defining equation.
    #[error("beta is not admissible: residual {0}")]
    BetaNotAdmissible(String),

    /// The frame does not span the requested operator.
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    /// A substitution matrix over the operator ring is not invertible.
    #[error("substitution is not invertible: {0}")]
    NonInvertibleSubstitution(String),

    /// An internal re-verification failed; indicates a bug, never bad input.
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    /// Syntax error with a byte offset into the input.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

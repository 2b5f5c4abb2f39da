//! Exact algebra for linear differential operators over rational-function fields.
//!
//! The crate is organized in layers:
//!
//! * [`numfield`] — the coefficient field: arbitrary-precision rationals,
//!   sparse multivariate polynomials, reduced rational functions, and the
//!   small algebraic utilities built on them (gcd, rational roots, square
//!   roots, univariate views).
//! * [`expr`] — a linear expression class closed under differentiation:
//!   rational-function combinations of derivatives of named arbitrary
//!   functions together with `exp`, `log` and formal antiderivative nodes.
//!   Membership makes "is this a solution?" a decidable question.
//! * [`lodo`] — ordinary differential operators in one derivation over
//!   `Q(x)`: the noncommutative Euclidean structure (division, gcd/lcm on
//!   both sides, Bézout solving), operator transformations and similarity,
//!   factor interchange, formal adjoints, rational kernels, and
//!   factorization-chain comparison.
//! * [`lpdo`] — partial differential operators: Leibniz products, principal
//!   symbols and their factorization, second-order hyperbolic normal forms,
//!   Laplace invariants, one-sided incomplete factorizations, and the
//!   classical cascade of Laplace transformations with closed-form solution
//!   assembly.
//! * [`ccsys`] — first-order systems with constant coefficients: module
//!   Gröbner bases for elimination, linear factor extraction from scalar
//!   eliminants, exponential solution synthesis, back-substitution, and
//!   invertible unknown substitutions.
//! * [`dini`] — Dini-type transformations of operators with a factorable
//!   principal symbol: commutators of first-order operators, frame
//!   expansions, characteristic decompositions, and the order-preserving
//!   transformation they induce.
//! * [`parse`] — a small recursive-descent parser providing every textual
//!   input context used by the command-line front end and by the tests.

pub mod ccsys;
pub mod dini;
mod error;
pub mod expr;
pub mod lodo;
pub mod lpdo;
pub mod numfield;
pub mod parse;

pub use error::{Error, Result};

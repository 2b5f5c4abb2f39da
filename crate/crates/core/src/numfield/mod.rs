//! The coefficient field `Q(x, y, ...)` and its polynomial substrate.
//!
//! Everything downstream computes exactly over this layer: arbitrary-precision
//! rationals ([`Rat`]), sparse multivariate polynomials ([`MPoly`]), reduced
//! rational functions ([`RatFunc`]), and univariate views with
//! rational-function coefficients ([`UniPoly`]).

pub(crate) mod linalg;
mod mpoly;
mod ratfunc;
mod unipoly;

pub use mpoly::{poly_gcd, rational_roots, sqrt_poly, MPoly, Mono};
pub use ratfunc::{sqrt_test, RatFunc};
pub use unipoly::UniPoly;
pub(crate) use unipoly::constant_coeffs;

use std::sync::{OnceLock, RwLock};

/// Arbitrary-precision rational scalar.
pub type Rat = num::BigRational;

/// `n/d` as a [`Rat`]. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

/// `n` as a [`Rat`].
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// Interned variable identifier.
///
/// Variables are created through [`var`] and live in a process-wide registry.
/// The numeric index doubles as the position of the variable in monomial
/// exponent vectors, and the canonical variable order (used by the graded
/// lexicographic term order) is registration order. The common axis names
/// `x`, `y`, `z` are interned eagerly so their relative order never depends
/// on which code path touches them first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

fn registry() -> &'static RwLock<Vec<String>> {
    static REG: OnceLock<RwLock<Vec<String>>> = OnceLock::new();
    REG.get_or_init(|| RwLock::new(vec!["x".into(), "y".into(), "z".into()]))
}

/// Interns `name` and returns its identifier; repeated calls are stable.
pub fn var(name: &str) -> Var {
    if let Some(v) = lookup_var(name) {
        return v;
    }
    let mut reg = registry().write().unwrap();
    // Re-check under the write lock: another thread may have interned it.
    if let Some(i) = reg.iter().position(|n| n == name) {
        return Var(i as u32);
    }
    reg.push(name.to_string());
    Var((reg.len() - 1) as u32)
}

/// Looks up an already-interned variable without creating it.
pub fn lookup_var(name: &str) -> Option<Var> {
    let reg = registry().read().unwrap();
    reg.iter().position(|n| n == name).map(|i| Var(i as u32))
}

/// The display name of `v`.
pub fn var_name(v: Var) -> String {
    registry().read().unwrap()[v.index()].clone()
}

/// The variable at registry position `i` (the inverse of [`Var::index`]).
pub(crate) fn var_by_index(i: usize) -> Var {
    debug_assert!(i < registry().read().unwrap().len());
    Var(i as u32)
}

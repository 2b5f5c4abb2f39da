//! Reduced rational functions: the coefficient field of every operator ring
//! in this crate.
//!
//! Invariants maintained by construction:
//! * the denominator is nonzero and monic under the graded lexicographic
//!   order, and
//! * numerator and denominator share no polynomial factor.
//!
//! Together these make the representation canonical, so `==` is equality in
//! the field.

use std::collections::BTreeSet;
use std::fmt;

use num::{One, Signed, Zero};

use super::mpoly::{poly_gcd, sqrt_poly};
use super::{MPoly, Rat, Var};
use crate::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct RatFunc {
    num: MPoly,
    den: MPoly,
}

impl RatFunc {
    /// Builds `num/den` in canonical form. Errors when `den == 0`.
    pub fn new(num: MPoly, den: MPoly) -> Result<RatFunc> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(RatFunc { num, den: MPoly::one() });
        }
        let g = poly_gcd(&num, &den);
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (
                num.divide_exact(&g).expect("gcd divides numerator"),
                den.divide_exact(&g).expect("gcd divides denominator"),
            )
        };
        let lc = den.leading().expect("nonzero denominator").1.clone();
        if !lc.is_one() {
            let inv = lc.recip();
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        Ok(RatFunc { num, den })
    }

    pub fn from_poly(p: MPoly) -> RatFunc {
        RatFunc { num: p, den: MPoly::one() }
    }

    pub fn from_rat(c: Rat) -> RatFunc {
        RatFunc::from_poly(MPoly::constant(c))
    }

    pub fn zero() -> RatFunc {
        RatFunc::from_poly(MPoly::zero())
    }

    pub fn one() -> RatFunc {
        RatFunc::from_poly(MPoly::one())
    }

    pub fn int(n: i64) -> RatFunc {
        RatFunc::from_poly(MPoly::int(n))
    }

    pub fn var(v: Var) -> RatFunc {
        RatFunc::from_poly(MPoly::var(v))
    }

    pub fn num(&self) -> &MPoly {
        &self.num
    }

    pub fn den(&self) -> &MPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// `Some(c)` when the function is the constant `c`.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.num.vars();
        out.extend(self.den.vars());
        out
    }

    pub fn add(&self, other: &RatFunc) -> RatFunc {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        RatFunc::new(num, den).expect("denominators nonzero")
    }

    pub fn sub(&self, other: &RatFunc) -> RatFunc {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, other: &RatFunc) -> RatFunc {
        RatFunc::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("denominators nonzero")
    }

    pub fn scale(&self, c: &Rat) -> RatFunc {
        RatFunc { num: self.num.scale(c), den: if self.num.is_zero() || c.is_zero() { MPoly::one() } else { self.den.clone() } }
    }

    pub fn div(&self, other: &RatFunc) -> Result<RatFunc> {
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        RatFunc::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn recip(&self) -> Result<RatFunc> {
        RatFunc::one().div(self)
    }

    /// Integer power; negative exponents invert (erroring on zero).
    pub fn pow(&self, e: i64) -> Result<RatFunc> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let mut out = RatFunc::one();
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        Ok(out)
    }

    /// Partial derivative, via the quotient rule and reduction.
    pub fn diff(&self, v: Var) -> RatFunc {
        let num = self.num.derivative(v).mul(&self.den).sub(&self.num.mul(&self.den.derivative(v)));
        let den = self.den.mul(&self.den);
        RatFunc::new(num, den).expect("denominator nonzero")
    }

    /// Sign of the leading numerator coefficient; the canonical denominator
    /// is monic, so this is a well-defined sign for display purposes.
    pub(crate) fn is_display_negative(&self) -> bool {
        self.num.leading().map_or(false, |(_, c)| c.is_negative())
    }
}

impl std::ops::Add for &RatFunc {
    type Output = RatFunc;
    fn add(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::add(self, rhs)
    }
}
impl std::ops::Sub for &RatFunc {
    type Output = RatFunc;
    fn sub(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::sub(self, rhs)
    }
}
impl std::ops::Mul for &RatFunc {
    type Output = RatFunc;
    fn mul(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::mul(self, rhs)
    }
}
impl std::ops::Neg for &RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc::neg(self)
    }
}

/// `Some(g)` with `g^2 == f`, if `f` is a perfect square in the field.
///
/// Because the canonical form makes numerator and denominator coprime with a
/// monic denominator, `f` is a square exactly when both parts are polynomial
/// squares. The result is normalized to a positive leading numerator
/// coefficient.
pub fn sqrt_test(f: &RatFunc) -> Option<RatFunc> {
    let n = sqrt_poly(&f.num)?;
    let d = sqrt_poly(&f.den)?;
    let g = RatFunc::new(n, d).expect("denominator nonzero");
    debug_assert_eq!(g.mul(&g), *f);
    Some(g)
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let num_str = self.num.to_string();
        let den_str = self.den.to_string();
        if self.num.num_terms() > 1 {
            write!(f, "({})", num_str)?;
        } else {
            write!(f, "{}", num_str)?;
        }
        // The denominator is parenthesized unless it is a bare power of a
        // single variable, which `/` already binds correctly.
        if den_str.contains(['+', '-', '*']) {
            write!(f, "/({})", den_str)
        } else {
            write!(f, "/{}", den_str)
        }
    }
}

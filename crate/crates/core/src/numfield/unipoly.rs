//! Dense univariate polynomials in one distinguished variable with
//! rational-function coefficients in the remaining ones.
//!
//! The coefficient field `K = Q(other variables)` is exact, so Euclidean
//! division, gcds and squarefree decompositions all run without growth
//! surprises. Upper layers use this view for pseudo-linear algebra that is
//! genuinely univariate: integration, indicial equations, resultant-free
//! divisibility tests.

use super::{rat_int, MPoly, Rat, RatFunc, Var};
use crate::{Error, Result};

/// Polynomial in `var` with [`RatFunc`] coefficients free of `var`.
/// `coeffs[i]` multiplies `var^i`; no trailing zeros are stored.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UniPoly {
    var: Var,
    coeffs: Vec<RatFunc>,
}

impl UniPoly {
    pub fn new(var: Var, mut coeffs: Vec<RatFunc>) -> UniPoly {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        debug_assert!(
            coeffs.iter().all(|c| !c.vars().contains(&var)),
            "coefficient involves the main variable"
        );
        UniPoly { var, coeffs }
    }

    pub fn zero(var: Var) -> UniPoly {
        UniPoly { var, coeffs: Vec::new() }
    }

    pub fn constant(var: Var, c: RatFunc) -> UniPoly {
        UniPoly::new(var, vec![c])
    }

    pub fn monomial(var: Var, c: RatFunc, deg: usize) -> UniPoly {
        let mut coeffs = vec![RatFunc::zero(); deg + 1];
        coeffs[deg] = c;
        UniPoly::new(var, coeffs)
    }

    /// Reinterprets a multivariate polynomial as univariate in `v`.
    pub fn from_mpoly(p: &MPoly, v: Var) -> UniPoly {
        let coeffs = p.univ_coeffs(v).into_iter().map(RatFunc::from_poly).collect();
        UniPoly::new(v, coeffs)
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn coeffs(&self) -> &[RatFunc] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> RatFunc {
        self.coeffs.get(i).cloned().unwrap_or_else(RatFunc::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lc(&self) -> Option<&RatFunc> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &UniPoly) -> UniPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect();
        UniPoly::new(self.var, coeffs)
    }

    pub fn sub(&self, other: &UniPoly) -> UniPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> UniPoly {
        UniPoly { var: self.var, coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    pub fn scale(&self, c: &RatFunc) -> UniPoly {
        if c.is_zero() {
            return UniPoly::zero(self.var);
        }
        UniPoly { var: self.var, coeffs: self.coeffs.iter().map(|k| k.mul(c)).collect() }
    }

    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        if self.is_zero() || other.is_zero() {
            return UniPoly::zero(self.var);
        }
        let mut coeffs = vec![RatFunc::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        UniPoly::new(self.var, coeffs)
    }

    /// Euclidean division over the coefficient field:
    /// `self = q*d + r` with `deg r < deg d`. Errors when `d == 0`.
    pub fn divrem(&self, d: &UniPoly) -> Result<(UniPoly, UniPoly)> {
        let dd = d.degree().ok_or(Error::DivisionByZero)?;
        let dlc = d.lc().unwrap();
        let mut rem = self.clone();
        let mut quo = UniPoly::zero(self.var);
        while let Some(dr) = rem.degree() {
            if dr < dd {
                break;
            }
            let c = rem.lc().unwrap().div(dlc)?;
            let t = UniPoly::monomial(self.var, c, dr - dd);
            quo = quo.add(&t);
            rem = rem.sub(&t.mul(d));
        }
        Ok((quo, rem))
    }

    /// Monic Euclidean gcd; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &UniPoly) -> UniPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.divrem(&b).expect("nonzero divisor").1;
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn monic(&self) -> UniPoly {
        match self.lc() {
            None => self.clone(),
            Some(c) => self.scale(&c.recip().expect("nonzero leading coefficient")),
        }
    }

    /// Extended Euclid: returns `(g, s, t)` with `s·self + t·other = g`,
    /// `g` the monic gcd.
    pub(crate) fn ext_gcd(&self, other: &UniPoly) -> (UniPoly, UniPoly, UniPoly) {
        let v = self.var;
        let mut r0 = self.clone();
        let mut r1 = other.clone();
        let (mut s0, mut s1) = (UniPoly::constant(v, RatFunc::one()), UniPoly::zero(v));
        let (mut t0, mut t1) = (UniPoly::zero(v), UniPoly::constant(v, RatFunc::one()));
        while !r1.is_zero() {
            let (q, r) = r0.divrem(&r1).expect("nonzero divisor");
            r0 = std::mem::replace(&mut r1, r);
            let ns = s0.sub(&q.mul(&s1));
            s0 = std::mem::replace(&mut s1, ns);
            let nt = t0.sub(&q.mul(&t1));
            t0 = std::mem::replace(&mut t1, nt);
        }
        match r0.lc() {
            None => (r0, s0, t0),
            Some(c) => {
                let u = c.recip().expect("nonzero leading coefficient");
                (r0.scale(&u), s0.scale(&u), t0.scale(&u))
            }
        }
    }

    /// Derivative in the main variable (coefficients are constants for it).
    pub fn derivative(&self) -> UniPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.scale(&rat_int(i as i64)))
            .collect();
        UniPoly::new(self.var, coeffs)
    }

    /// Horner evaluation at a rational function.
    pub fn eval(&self, at: &RatFunc) -> RatFunc {
        let mut acc = RatFunc::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(at).add(c);
        }
        acc
    }

    pub fn to_ratfunc(&self) -> RatFunc {
        self.eval(&RatFunc::var(self.var))
    }

    /// Yun's squarefree decomposition: returns monic pairwise-coprime
    /// squarefree `p_i` with `self = lc * prod p_i^i` (nonzero input).
    pub fn squarefree(&self) -> Vec<(UniPoly, u32)> {
        let f = self.monic();
        if f.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let df = f.derivative();
        let a = f.gcd(&df);
        let mut b = f.divrem(&a).expect("gcd divides").0;
        let mut c = df.divrem(&a).expect("gcd divides").0;
        let mut d = c.sub(&b.derivative());
        let mut out = Vec::new();
        let mut i = 1u32;
        while b.degree().unwrap_or(0) > 0 {
            let p = b.gcd(&d);
            if p.degree().unwrap_or(0) > 0 {
                out.push((p.clone(), i));
            }
            b = b.divrem(&p).expect("factor divides").0;
            c = d.divrem(&p).expect("factor divides").0;
            d = c.sub(&b.derivative());
            i += 1;
        }
        out
    }
}

/// Dense rational coefficients when every coefficient is a constant.
pub(crate) fn constant_coeffs(p: &UniPoly) -> Option<Vec<Rat>> {
    p.coeffs().iter().map(|c| c.as_constant()).collect()
}

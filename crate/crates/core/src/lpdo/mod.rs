//! Linear partial differential operators with rational-function coefficients.
//!
//! An operator is a finite sum `sum f_mu(x,y,z,...) * D^mu` over derivative
//! multi-indices `mu`; composition follows the multivariate Leibniz rule, so
//! the ring is noncommutative. The principal symbol — the top-order part read
//! commutatively — is where factorization questions start: a factorization of
//! the operator forces one of the symbol, and the cascade/transformation
//! machinery in [`laplace`] and the characteristic calculus in
//! [`crate::dini`] both key off symbol factors.

mod laplace;
mod solution;

pub use laplace::{
    laplace_cascade, laplace_invariants, laplace_step, naive_factor, to_hyperbolic, ChainStep,
    Direction, HyperbolicForm, LaplaceChain,
};
pub use solution::{
    build_solution, integrate_rational, verify_solution, BuiltSolution, RationalIntegral,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::numfield::{rat_int, sqrt_test, var_name, Mono, Rat, RatFunc, Var};
use crate::{Error, Result};

/// Partial differential operator: derivative multi-index -> coefficient.
/// Multi-indices reuse the variable registry, so `Dx` is "one derivative in
/// the variable `x`".
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PDOp {
    terms: BTreeMap<Mono, RatFunc>,
}

impl PDOp {
    pub fn zero() -> PDOp {
        PDOp::default()
    }

    pub fn one() -> PDOp {
        PDOp::constant(RatFunc::one())
    }

    /// Multiplication operator by `f`.
    pub fn constant(f: RatFunc) -> PDOp {
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert(Mono::one(), f);
        }
        PDOp { terms }
    }

    /// The derivation `D_v`.
    pub fn dop(v: Var) -> PDOp {
        PDOp::mono(Mono::var(v, 1), RatFunc::one())
    }

    pub fn mono(m: Mono, c: RatFunc) -> PDOp {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        PDOp { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Mono, RatFunc)>>(iter: I) -> PDOp {
        let mut p = PDOp::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Mono, c: RatFunc) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &RatFunc)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Mono) -> RatFunc {
        self.terms.get(m).cloned().unwrap_or_else(RatFunc::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total order of the operator; `None` for the zero operator.
    pub fn order(&self) -> Option<u32> {
        self.terms.keys().map(Mono::degree).max()
    }

    /// Variables that appear as derivation directions.
    pub fn deriv_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            out.extend(m.vars());
        }
        out
    }

    /// Variables appearing in coefficients.
    pub fn coeff_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for c in self.terms.values() {
            out.extend(c.vars());
        }
        out
    }

    pub fn add(&self, other: &PDOp) -> PDOp {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &PDOp) -> PDOp {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PDOp {
        PDOp { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect() }
    }

    pub fn scale(&self, f: &RatFunc) -> PDOp {
        if f.is_zero() {
            return PDOp::zero();
        }
        PDOp { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.mul(f))).collect() }
    }

    /// Composition `self ∘ other` by the multivariate Leibniz rule:
    /// `D^mu ∘ (g·D^nu) = sum_{kappa <= mu} C(mu, kappa) g^(kappa) D^(mu-kappa+nu)`.
    pub fn mul(&self, other: &PDOp) -> PDOp {
        let mut out = PDOp::zero();
        for (mu, f) in &self.terms {
            for (nu, g) in &other.terms {
                for kappa in sub_indices(mu) {
                    let gk = partial(g, &kappa);
                    if gk.is_zero() {
                        continue;
                    }
                    let rest = mu.try_div(&kappa).expect("kappa <= mu");
                    let coeff = f.mul(&gk).scale(&multi_binom(mu, &kappa));
                    out.add_term(rest.mul(nu), coeff);
                }
            }
        }
        out
    }

    /// The commutator `[self, other] = self∘other - other∘self`.
    pub fn commutator(&self, other: &PDOp) -> PDOp {
        self.mul(other).sub(&other.mul(self))
    }

    /// Applies the operator to a rational function.
    pub fn apply_ratfunc(&self, g: &RatFunc) -> RatFunc {
        let mut out = RatFunc::zero();
        for (mu, f) in &self.terms {
            out = out.add(&f.mul(&partial(g, mu)));
        }
        out
    }
}

/// Iterated partial derivative `g^(kappa)`.
pub(crate) fn partial(g: &RatFunc, kappa: &Mono) -> RatFunc {
    let mut out = g.clone();
    for (i, e) in kappa.exps().iter().enumerate() {
        for _ in 0..*e {
            if out.is_zero() {
                return out;
            }
            out = out.diff(crate::numfield::var_by_index(i));
        }
    }
    out
}

/// All multi-indices `kappa <= mu` componentwise.
fn sub_indices(mu: &Mono) -> Vec<Mono> {
    let exps = mu.exps();
    let mut out = vec![Vec::new()];
    for &e in exps {
        let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
        for prefix in &out {
            for k in 0..=e {
                let mut p = prefix.clone();
                p.push(k);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(Mono::from_exps).collect()
}

fn multi_binom(mu: &Mono, kappa: &Mono) -> Rat {
    let mut acc = rat_int(1);
    for (i, &k) in kappa.exps().iter().enumerate() {
        let n = mu.exps()[i];
        acc *= rat_int(binom(n, k));
    }
    acc
}

fn binom(n: u32, k: u32) -> i64 {
    let mut acc = 1i64;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

impl std::ops::Add for &PDOp {
    type Output = PDOp;
    fn add(self, rhs: &PDOp) -> PDOp {
        PDOp::add(self, rhs)
    }
}
impl std::ops::Sub for &PDOp {
    type Output = PDOp;
    fn sub(self, rhs: &PDOp) -> PDOp {
        PDOp::sub(self, rhs)
    }
}
impl std::ops::Mul for &PDOp {
    type Output = PDOp;
    fn mul(self, rhs: &PDOp) -> PDOp {
        PDOp::mul(self, rhs)
    }
}

// ---------------------------------------------------------------------------
// Principal symbols
// ---------------------------------------------------------------------------

/// The top-order part of the operator, read as a commutative polynomial in
/// the derivation symbols. Represented as a [`PDOp`] whose terms are all of
/// maximal total degree; combine symbols with [`symbol_mul`], never
/// [`PDOp::mul`].
pub fn principal_symbol(op: &PDOp) -> PDOp {
    let Some(ord) = op.order() else {
        return PDOp::zero();
    };
    PDOp {
        terms: op
            .terms
            .iter()
            .filter(|(m, _)| m.degree() == ord)
            .map(|(m, c)| (m.clone(), c.clone()))
            .collect(),
    }
}

/// Commutative product of symbols (no Leibniz corrections).
pub fn symbol_mul(a: &PDOp, b: &PDOp) -> PDOp {
    let mut out = PDOp::zero();
    for (m1, c1) in &a.terms {
        for (m2, c2) in &b.terms {
            out.add_term(m1.mul(m2), c1.mul(c2));
        }
    }
    out
}

/// Exact commutative quotient of symbols, when it exists.
pub fn symbol_divide_exact(a: &PDOp, d: &PDOp) -> Option<PDOp> {
    let (dm, dc) = d.terms.iter().next_back()?;
    let mut rem = a.clone();
    let mut quo = PDOp::zero();
    while let Some((rm, rc)) = rem.terms.iter().next_back().map(|(m, c)| (m.clone(), c.clone())) {
        let m = rm.try_div(dm)?;
        let c = rc.div(dc).expect("leading coefficient nonzero");
        quo.add_term(m.clone(), c.clone());
        rem = rem.sub(&symbol_mul(&PDOp::mono(m, c), d));
    }
    Some(quo)
}

/// Factors a homogeneous symbol into first-order symbol factors over the
/// rational-function field.
///
/// Handles: monomial content extraction, anything already linear, binary
/// forms (rational-root splitting for constant coefficients, discriminant
/// square test for quadratics), and quadratics in three or more symbols via
/// a linear-form square root of the discriminant. Returns `Ok(None)` when a
/// complete splitting into linear factors provably does not exist over the
/// field, and [`Error::UnsupportedShape`] outside the decided fragment.
pub fn factor_symbol(sym: &PDOp) -> Result<Option<Vec<PDOp>>> {
    let Some(deg) = sym.order() else {
        return Err(Error::InvalidArgument("factor_symbol of the zero symbol".into()));
    };
    if sym.terms.keys().any(|m| m.degree() != deg) {
        return Err(Error::InvalidArgument("factor_symbol requires a homogeneous symbol".into()));
    }

    let mut factors: Vec<PDOp> = Vec::new();
    let mut rest = sym.clone();

    // Monomial content: componentwise minimum of the exponent vectors.
    let content = sym
        .terms
        .keys()
        .cloned()
        .reduce(|a, b| {
            let n = a.exps().len().min(b.exps().len());
            Mono::from_exps((0..n).map(|i| a.exps()[i].min(b.exps()[i])).collect())
        })
        .unwrap();
    if !content.is_one() {
        for (i, &e) in content.exps().iter().enumerate() {
            for _ in 0..e {
                factors.push(PDOp::dop(crate::numfield::var_by_index(i)));
            }
        }
        let q = symbol_divide_exact(&rest, &PDOp::mono(content, RatFunc::one()))
            .expect("content divides");
        rest = q;
    }

    let rdeg = rest.order().unwrap();
    if rdeg == 0 {
        fold_unit(&mut factors, &rest.coeff(&Mono::one()));
        return Ok(Some(factors));
    }
    if rdeg == 1 {
        factors.push(rest);
        return Ok(Some(factors));
    }

    let active: Vec<Var> = rest.deriv_vars().into_iter().collect();
    let split = if active.len() == 2 {
        binary_split(&rest, active[0], active[1], rdeg)?
    } else if rdeg == 2 {
        quadratic_split(&rest, *active.last().unwrap())?
    } else {
        return Err(Error::UnsupportedShape(format!(
            "symbol of degree {rdeg} in {} directions",
            active.len()
        )));
    };
    match split {
        None => Ok(None),
        Some(mut fs) => {
            factors.append(&mut fs);
            Ok(Some(factors))
        }
    }
}

/// Multiplies the unit `u` into the first factor (or records it alone).
fn fold_unit(factors: &mut Vec<PDOp>, u: &RatFunc) {
    if u.is_one() {
        return;
    }
    if let Some(f) = factors.first_mut() {
        *f = f.scale(u);
    } else {
        factors.push(PDOp::constant(u.clone()));
    }
}

/// Splits a binary form in `a`, `b` of degree `d` (no common monomial factor).
fn binary_split(rest: &PDOp, a: Var, b: Var, d: u32) -> Result<Option<Vec<PDOp>>> {
    // Dehomogenized coefficients: c[i] multiplies a^i b^(d-i).
    let mut c = vec![RatFunc::zero(); d as usize + 1];
    for (m, coeff) in rest.terms.iter() {
        c[m.exp(a) as usize] = coeff.clone();
    }
    debug_assert!(!c[d as usize].is_zero(), "content was extracted");

    if c.iter().all(|f| f.as_constant().is_some()) {
        // Binary form over Q: linear factors correspond to rational roots
        // (the only elements of the field algebraic over Q are rationals).
        let mut poly = crate::numfield::MPoly::zero();
        for (i, f) in c.iter().enumerate() {
            let coeff = f.as_constant().unwrap();
            poly = poly.add(&crate::numfield::MPoly::var_pow(a, i as u32).scale(&coeff));
        }
        let roots = crate::numfield::rational_roots(&poly)?;
        if roots.len() < d as usize {
            return Ok(None);
        }
        let mut out = Vec::new();
        for r in roots {
            // factor a - r*b
            out.push(PDOp::from_terms([
                (Mono::var(a, 1), RatFunc::one()),
                (Mono::var(b, 1), RatFunc::from_rat(-r)),
            ]));
        }
        fold_unit(&mut out, &c[d as usize]);
        return Ok(Some(out));
    }
    if d == 2 {
        let disc = c[1].mul(&c[1]).sub(&c[2].mul(&c[0]).scale(&rat_int(4)));
        let Some(s) = sqrt_test(&disc) else {
            return Ok(None);
        };
        let two_a = c[2].scale(&rat_int(2));
        let r_plus = c[1].neg().add(&s).div(&two_a)?;
        let r_minus = c[1].neg().sub(&s).div(&two_a)?;
        let lin = |r: &RatFunc| {
            PDOp::from_terms([
                (Mono::var(a, 1), RatFunc::one()),
                (Mono::var(b, 1), r.neg()),
            ])
        };
        let mut out = vec![lin(&r_plus), lin(&r_minus)];
        fold_unit(&mut out, &c[2]);
        return Ok(Some(out));
    }
    Err(Error::UnsupportedShape(format!("binary form of degree {d} with non-constant coefficients")))
}

/// Splits a quadratic symbol with three or more active directions, treating
/// it as a quadratic in the top-ranked direction `a`.
fn quadratic_split(rest: &PDOp, a: Var) -> Result<Option<Vec<PDOp>>> {
    let mut aa = RatFunc::zero(); // coeff of a^2
    let mut b = PDOp::zero(); // linear symbol multiplying a
    let mut c = PDOp::zero(); // a-free part
    for (m, coeff) in rest.terms.iter() {
        match m.exp(a) {
            2 => aa = coeff.clone(),
            1 => b.add_term(m.try_div(&Mono::var(a, 1)).unwrap(), coeff.clone()),
            0 => c.add_term(m.clone(), coeff.clone()),
            _ => unreachable!("degree 2"),
        }
    }
    if aa.is_zero() {
        // rest = a*B + C: factors as (a + C/B)*B exactly when B divides C.
        if b.is_zero() {
            return Err(Error::UnsupportedShape("quadratic without the chosen direction".into()));
        }
        let Some(u) = symbol_divide_exact(&c, &b) else {
            return Ok(None);
        };
        let lead = PDOp::dop(a).add(&u);
        return Ok(Some(vec![lead, b]));
    }
    // Complete the square: disc = B^2 - 4*A*C must be the square of a linear
    // symbol S; then rest = A*(a - (-B+S)/(2A))*(a - (-B-S)/(2A)).
    let disc = symbol_mul(&b, &b).sub(&symbol_mul(&PDOp::constant(aa.scale(&rat_int(4))), &c));
    let Some(s) = linear_symbol_sqrt(&disc) else {
        return Ok(None);
    };
    let inv_2a = aa.scale(&rat_int(2)).recip()?;
    let r_plus = b.neg().add(&s).scale(&inv_2a);
    let r_minus = b.neg().sub(&s).scale(&inv_2a);
    let mut out = vec![PDOp::dop(a).sub(&r_plus), PDOp::dop(a).sub(&r_minus)];
    fold_unit(&mut out, &aa);
    Ok(Some(out))
}

/// Square root of a quadratic symbol as a linear symbol, when one exists.
fn linear_symbol_sqrt(q: &PDOp) -> Option<PDOp> {
    if q.is_zero() {
        return Some(PDOp::zero());
    }
    // A linear form's square always contains the square of some direction.
    let w = q
        .terms
        .keys()
        .find_map(|m| m.vars().into_iter().find(|v| m.exp(*v) == 2))?;
    let sw = sqrt_test(&q.coeff(&Mono::var(w, 2)))?;
    let mut s = PDOp::mono(Mono::var(w, 1), sw.clone());
    let denom = sw.scale(&rat_int(2));
    for (m, coeff) in q.terms.iter() {
        if m.exp(w) == 1 {
            let other = m.try_div(&Mono::var(w, 1)).unwrap();
            s.add_term(other, coeff.div(&denom).expect("sqrt nonzero"));
        }
    }
    if symbol_mul(&s, &s) == *q {
        Some(s)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

pub(crate) fn dop_string(m: &Mono) -> String {
    let mut parts = Vec::new();
    for (i, e) in m.exps().iter().enumerate() {
        if *e == 0 {
            continue;
        }
        let name = format!("D{}", var_name(crate::numfield::var_by_index(i)));
        if *e == 1 {
            parts.push(name);
        } else {
            parts.push(format!("{}^{}", name, e));
        }
    }
    parts.join("*")
}

impl fmt::Display for PDOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            crate::lodo::fmt_term(f, &mut first, c, &dop_string(m))?;
        }
        Ok(())
    }
}

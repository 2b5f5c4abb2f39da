//! Sparse multivariate polynomials over the rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by monomial under the graded
//! lexicographic order (total degree first, then earlier-registered variables
//! rank higher). That makes every polynomial canonical by construction, so
//! structural equality is mathematical equality.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{One, Signed, Zero};

use super::{rat_int, var_name, Rat, Var};
use crate::{Error, Result};

/// Power product `x1^e1 * x2^e2 * ...`.
///
/// The exponent vector is indexed by [`Var::index`] and kept free of trailing
/// zeros, so equal monomials are structurally equal no matter how many
/// variables have been interned.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Mono(Vec<u32>);

impl Mono {
    pub fn one() -> Self {
        Mono(Vec::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn var(v: Var, e: u32) -> Self {
        let mut exps = vec![0; v.index() + 1];
        exps[v.index()] = e;
        Mono::from_exps(exps)
    }

    pub fn from_exps(mut exps: Vec<u32>) -> Self {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        Mono(exps)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exp(&self, v: Var) -> u32 {
        self.0.get(v.index()).copied().unwrap_or(0)
    }

    pub fn vars(&self) -> Vec<Var> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0).map(|i| Var(i as u32)).collect()
    }

    pub fn mul(&self, other: &Mono) -> Mono {
        let n = self.0.len().max(other.0.len());
        let exps = (0..n)
            .map(|i| self.0.get(i).unwrap_or(&0) + other.0.get(i).unwrap_or(&0))
            .collect();
        Mono::from_exps(exps)
    }

    /// `self / other` when `other` divides `self` componentwise.
    pub fn try_div(&self, other: &Mono) -> Option<Mono> {
        if other.0.len() > self.0.len() {
            return None;
        }
        let mut exps = self.0.clone();
        for (i, e) in other.0.iter().enumerate() {
            if exps[i] < *e {
                return None;
            }
            exps[i] -= e;
        }
        Some(Mono::from_exps(exps))
    }

    pub fn lcm(&self, other: &Mono) -> Mono {
        let n = self.0.len().max(other.0.len());
        let exps = (0..n)
            .map(|i| *self.0.get(i).unwrap_or(&0).max(other.0.get(i).unwrap_or(&0)))
            .collect();
        Mono::from_exps(exps)
    }

    /// Pure lexicographic comparison along an explicit variable ranking;
    /// earlier entries of `order` are more significant.
    pub fn cmp_lex(&self, other: &Mono, order: &[Var]) -> Ordering {
        for v in order {
            match self.exp(*v).cmp(&other.exp(*v)) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl Ord for Mono {
    /// Graded lexicographic: compare total degree, then exponents with
    /// earlier variables more significant.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let n = self.0.len().max(other.0.len());
            for i in 0..n {
                let a = self.0.get(i).copied().unwrap_or(0);
                let b = other.0.get(i).copied().unwrap_or(0);
                match a.cmp(&b) {
                    Ordering::Equal => {}
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial over `Q`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, PartialOrd, Ord)]
pub struct MPoly {
    terms: BTreeMap<Mono, Rat>,
}

impl MPoly {
    pub fn zero() -> Self {
        MPoly::default()
    }

    pub fn one() -> Self {
        MPoly::constant(Rat::one())
    }

    pub fn int(n: i64) -> Self {
        MPoly::constant(rat_int(n))
    }

    pub fn constant(c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::one(), c);
        }
        MPoly { terms }
    }

    pub fn var(v: Var) -> Self {
        MPoly::var_pow(v, 1)
    }

    pub fn var_pow(v: Var, e: u32) -> Self {
        if e == 0 {
            return MPoly::one();
        }
        let mut terms = BTreeMap::new();
        terms.insert(Mono::var(v, e), Rat::one());
        MPoly { terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (Mono, Rat)>>(iter: I) -> Self {
        let mut p = MPoly::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map_or(false, |c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.is_zero() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().is_one())
    }

    /// The value of a constant polynomial (`Some(0)` for the zero polynomial).
    pub fn as_constant(&self) -> Option<Rat> {
        if self.is_zero() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_one() {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn coeff(&self, m: &Mono) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    pub(crate) fn add_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Leading term under the graded lexicographic order.
    pub fn leading(&self) -> Option<(&Mono, &Rat)> {
        self.terms.iter().next_back()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.leading().map(|(m, _)| m.degree())
    }

    pub fn degree_in(&self, v: Var) -> u32 {
        self.terms.keys().map(|m| m.exp(v)).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (i, e) in m.exps().iter().enumerate() {
                if *e > 0 {
                    out.insert(Var(i as u32));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> MPoly {
        MPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        let mut out = MPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> MPoly {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul_mono(&self, m: &Mono, c: &Rat) -> MPoly {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self.terms.iter().map(|(k, v)| (k.mul(m), v * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> MPoly {
        let mut out = MPoly::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, v: Var) -> MPoly {
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            let e = m.exp(v);
            if e == 0 {
                continue;
            }
            let mut exps = m.exps().to_vec();
            exps[v.index()] -= 1;
            out.add_term(Mono::from_exps(exps), c * rat_int(e as i64));
        }
        out
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn divide_exact(&self, d: &MPoly) -> Option<MPoly> {
        let (dm, dc) = d.leading()?; // None for the zero divisor
        let mut rem = self.clone();
        let mut quo = MPoly::zero();
        while let Some((rm, rc)) = rem.leading() {
            let m = rm.try_div(dm)?;
            let c = rc / dc;
            quo.add_term(m.clone(), c.clone());
            rem = rem.sub(&d.mul_mono(&m, &c));
        }
        Some(quo)
    }

    /// Coefficients of `self` viewed as a univariate polynomial in `v`;
    /// index `i` holds the coefficient of `v^i` (a polynomial in the
    /// remaining variables). The zero polynomial yields an empty vector.
    pub fn univ_coeffs(&self, v: Var) -> Vec<MPoly> {
        if self.is_zero() {
            return Vec::new();
        }
        let mut out = vec![MPoly::zero(); self.degree_in(v) as usize + 1];
        for (m, c) in &self.terms {
            let e = m.exp(v);
            let mut exps = m.exps().to_vec();
            if (v.index()) < exps.len() {
                exps[v.index()] = 0;
            }
            out[e as usize].add_term(Mono::from_exps(exps), c.clone());
        }
        out
    }

    pub fn from_univ_coeffs(v: Var, coeffs: &[MPoly]) -> MPoly {
        let mut out = MPoly::zero();
        for (i, c) in coeffs.iter().enumerate() {
            out = out.add(&c.mul(&MPoly::var_pow(v, i as u32)));
        }
        out
    }

    /// Dense coefficient list when `self` involves no variable besides `v`.
    pub fn as_univariate(&self, v: Var) -> Option<Vec<Rat>> {
        let vars = self.vars();
        if !vars.is_empty() && !(vars.len() == 1 && vars.contains(&v)) {
            return None;
        }
        let mut out = vec![Rat::zero(); self.degree_in(v) as usize + 1];
        for (m, c) in &self.terms {
            out[m.exp(v) as usize] = c.clone();
        }
        Some(out)
    }

    /// Substitutes rational functions for variables; variables absent from
    /// `map` stay themselves.
    pub fn substitute(&self, map: &BTreeMap<Var, super::RatFunc>) -> super::RatFunc {
        use super::RatFunc;
        let mut acc = RatFunc::zero();
        for (m, c) in &self.terms {
            let mut term = RatFunc::from_rat(c.clone());
            for (i, e) in m.exps().iter().enumerate() {
                if *e == 0 {
                    continue;
                }
                let v = Var(i as u32);
                let base = match map.get(&v) {
                    Some(f) => f.clone(),
                    None => RatFunc::from_poly(MPoly::var(v)),
                };
                term = term.mul(&base.pow(*e as i64).expect("nonnegative power"));
            }
            acc = acc.add(&term);
        }
        acc
    }

    /// Monic normalization: divides by the leading coefficient.
    pub fn monic(&self) -> MPoly {
        match self.leading() {
            None => MPoly::zero(),
            Some((_, c)) => {
                let inv = c.recip();
                self.scale(&inv)
            }
        }
    }
}

impl std::ops::Add for &MPoly {
    type Output = MPoly;
    fn add(self, rhs: &MPoly) -> MPoly {
        MPoly::add(self, rhs)
    }
}
impl std::ops::Sub for &MPoly {
    type Output = MPoly;
    fn sub(self, rhs: &MPoly) -> MPoly {
        MPoly::sub(self, rhs)
    }
}
impl std::ops::Mul for &MPoly {
    type Output = MPoly;
    fn mul(self, rhs: &MPoly) -> MPoly {
        MPoly::mul(self, rhs)
    }
}
impl std::ops::Neg for &MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        MPoly::neg(self)
    }
}

// ---------------------------------------------------------------------------
// Greatest common divisors
// ---------------------------------------------------------------------------

/// Monic gcd of two polynomials; `poly_gcd(0, 0) = 0`.
///
/// Uses the classical content/primitive-part recursion on the most recently
/// registered variable, with a primitive pseudo-remainder sequence inside
/// each level. Rational scalars are units, so "content" always means the
/// polynomial content in the remaining variables.
pub fn poly_gcd(p: &MPoly, q: &MPoly) -> MPoly {
    if p.is_zero() {
        return q.monic();
    }
    if q.is_zero() {
        return p.monic();
    }
    gcd_rec(p, q).monic()
}

fn gcd_rec(p: &MPoly, q: &MPoly) -> MPoly {
    let mut vars = p.vars();
    vars.extend(q.vars());
    let v = match vars.iter().next_back() {
        None => return MPoly::one(), // two nonzero rational constants
        Some(v) => *v,
    };

    let (cont_p, pp_p) = content_and_primitive(p, v);
    let (cont_q, pp_q) = content_and_primitive(q, v);
    let cont = gcd_rec(&cont_p, &cont_q);

    let (mut a, mut b) = if p.degree_in(v) >= q.degree_in(v) {
        (rat_primitive(&pp_p), rat_primitive(&pp_q))
    } else {
        (rat_primitive(&pp_q), rat_primitive(&pp_p))
    };
    while !b.is_zero() {
        let r = pseudo_rem(&a, &b, v);
        a = b;
        b = if r.is_zero() {
            r
        } else {
            rat_primitive(&content_and_primitive(&r, v).1)
        };
    }
    cont.mul(&a)
}

/// Scales the polynomial so its coefficients become coprime integers with a
/// positive leading coefficient. Rational scalars are units, so this never
/// changes divisibility — but without it the pseudo-remainder sequence keeps
/// coefficients as ever-growing reduced fractions whose bit length doubles
/// per step (over ℚ the polynomial content is always trivial, so the usual
/// primitive-part reduction does nothing for the scalar part).
fn rat_primitive(p: &MPoly) -> MPoly {
    use num::Integer;
    if p.is_zero() {
        return p.clone();
    }
    let mut num_gcd = num::BigInt::zero();
    let mut den_lcm = num::BigInt::one();
    for (_, c) in p.terms() {
        num_gcd = num_gcd.gcd(c.numer());
        den_lcm = den_lcm.lcm(c.denom());
    }
    let scaled = p.scale(&Rat::new(den_lcm, num_gcd));
    match scaled.leading() {
        Some((_, lc)) if lc.is_negative() => scaled.neg(),
        _ => scaled,
    }
}

/// Splits `p` (nonzero) into its content and primitive part with respect to
/// the main variable `v`: `p = content * primitive`, where the content is the
/// monic gcd of the `v`-coefficients.
fn content_and_primitive(p: &MPoly, v: Var) -> (MPoly, MPoly) {
    let coeffs = p.univ_coeffs(v);
    let mut cont = MPoly::zero();
    for c in &coeffs {
        if !c.is_zero() {
            cont = if cont.is_zero() { c.monic() } else { gcd_rec(&cont, c).monic() };
            if cont.is_one() {
                break;
            }
        }
    }
    let pp = p.divide_exact(&cont).expect("content divides");
    (cont, pp)
}

/// Pseudo-remainder of `a` by `b` in the variable `v`:
/// `lc(b)^(deg a - deg b + 1) * a = q*b + prem`. Requires `b` nonzero.
fn pseudo_rem(a: &MPoly, b: &MPoly, v: Var) -> MPoly {
    let db = b.degree_in(v);
    let bc = b.univ_coeffs(v);
    let lb = bc.last().unwrap().clone();
    let mut r = a.clone();
    let mut mults = (a.degree_in(v) as i64) - (db as i64) + 1;
    while !r.is_zero() && r.degree_in(v) >= db && mults > 0 {
        let dr = r.degree_in(v);
        let lr = r.univ_coeffs(v).pop().unwrap();
        // r <- lb*r - lr * v^(dr-db) * b
        r = lb.mul(&r).sub(&lr.mul(&MPoly::var_pow(v, dr - db)).mul(b));
        mults -= 1;
    }
    // Pad with the unused multiplier so the result matches the textbook
    // definition exactly (only the v-primitive part matters to callers).
    for _ in 0..mults.max(0) {
        r = lb.mul(&r);
    }
    r
}

// ---------------------------------------------------------------------------
// Rational roots
// ---------------------------------------------------------------------------

/// All rational roots of a univariate polynomial, with multiplicity, in
/// ascending order.
pub fn rational_roots(p: &MPoly) -> Result<Vec<Rat>> {
    use num::BigInt;

    if p.is_zero() {
        return Err(Error::InvalidArgument("rational_roots of the zero polynomial".into()));
    }
    let vars = p.vars();
    if vars.len() > 1 {
        let names: Vec<String> = vars.iter().map(|v| var_name(*v)).collect();
        return Err(Error::NotUnivariate(names.join(", ")));
    }
    let v = match vars.iter().next() {
        None => return Ok(Vec::new()), // nonzero constant
        Some(v) => *v,
    };

    // Integer-normalized dense coefficients, low degree first.
    let rats = p.as_univariate(v).expect("vars checked");
    let mut denom_lcm = BigInt::one();
    for c in &rats {
        denom_lcm = num::integer::lcm(denom_lcm, c.denom().clone());
    }
    let mut coeffs: Vec<BigInt> = rats.iter().map(|c| (c * Rat::from_integer(denom_lcm.clone())).to_integer()).collect();

    let mut roots = Vec::new();
    while coeffs.first().map_or(false, |c| c.is_zero()) {
        roots.push(Rat::zero());
        coeffs.remove(0);
    }
    if coeffs.len() <= 1 {
        roots.sort();
        return Ok(roots);
    }

    let a0 = coeffs.first().unwrap().abs();
    let an = coeffs.last().unwrap().abs();
    let mut candidates: Vec<Rat> = Vec::new();
    for n in divisors(&a0) {
        for d in divisors(&an) {
            let r = Rat::new(n.clone(), d);
            candidates.push(r.clone());
            candidates.push(-r);
        }
    }
    candidates.sort();
    candidates.dedup();

    let mut poly: Vec<Rat> = coeffs.into_iter().map(Rat::from_integer).collect();
    for cand in candidates {
        loop {
            if poly.len() <= 1 {
                break;
            }
            match synthetic_div(&poly, &cand) {
                Some(q) => {
                    roots.push(cand.clone());
                    poly = q;
                }
                None => break,
            }
        }
    }
    roots.sort();
    Ok(roots)
}

/// Positive divisors of `n` (requires `n > 0`).
fn divisors(n: &num::BigInt) -> Vec<num::BigInt> {
    use num::BigInt;
    let mut out = Vec::new();
    let mut i = BigInt::one();
    while &i * &i <= *n {
        if (n % &i).is_zero() {
            out.push(i.clone());
            let j = n / &i;
            if j != i {
                out.push(j);
            }
        }
        i += 1;
    }
    out
}

/// Divides `poly` (dense, low degree first) by `(v - r)`; `Some(quotient)`
/// exactly when `r` is a root.
fn synthetic_div(poly: &[Rat], r: &Rat) -> Option<Vec<Rat>> {
    let mut acc = Rat::zero();
    let mut quot = vec![Rat::zero(); poly.len() - 1];
    for i in (0..poly.len()).rev() {
        acc = &poly[i] + &acc * r;
        if i > 0 {
            quot[i - 1] = acc.clone();
        }
    }
    if acc.is_zero() {
        Some(quot)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Polynomial square roots
// ---------------------------------------------------------------------------

/// `Some(s)` with `s^2 == p`, if a polynomial square root exists.
///
/// Works top-down in the most significant variable: the square root of the
/// leading coefficient is computed recursively, and the remaining
/// coefficients follow by exact division. The sign is normalized so the
/// leading coefficient is positive.
pub fn sqrt_poly(p: &MPoly) -> Option<MPoly> {
    if p.is_zero() {
        return Some(MPoly::zero());
    }
    if let Some(c) = p.as_constant() {
        return rat_sqrt(&c).map(MPoly::constant);
    }
    let v = *p.vars().iter().next_back().unwrap();
    let coeffs = p.univ_coeffs(v);
    let d = coeffs.len() - 1;
    if d % 2 != 0 {
        return None;
    }
    let m = d / 2;
    let mut s = vec![MPoly::zero(); m + 1];
    s[m] = sqrt_poly(&coeffs[d])?;
    let two_lead = s[m].scale(&rat_int(2));
    for k in (0..m).rev() {
        // Coefficient of v^(m+k) in s^2 is 2*s_m*s_k plus cross terms with
        // both indices strictly between k and m.
        let mut acc = coeffs[m + k].clone();
        for i in (k + 1)..m {
            let j = m + k - i;
            if j > k && j <= m {
                acc = acc.sub(&s[i].mul(&s[j]));
            }
        }
        s[k] = acc.divide_exact(&two_lead)?;
    }
    let cand = MPoly::from_univ_coeffs(v, &s);
    if cand.mul(&cand) == *p {
        let lead_positive = cand.leading().map_or(true, |(_, c)| c.is_positive());
        Some(if lead_positive { cand } else { cand.neg() })
    } else {
        None
    }
}

fn rat_sqrt(c: &Rat) -> Option<Rat> {
    if c.is_negative() {
        return None;
    }
    let n = c.numer().sqrt();
    let d = c.denom().sqrt();
    if &(&n * &n) == c.numer() && &(&d * &d) == c.denom() {
        Some(Rat::new(n, d))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

pub(crate) fn mono_string(m: &Mono) -> String {
    let mut parts = Vec::new();
    for (i, e) in m.exps().iter().enumerate() {
        if *e == 0 {
            continue;
        }
        let name = var_name(Var(i as u32));
        if *e == 1 {
            parts.push(name);
        } else {
            parts.push(format!("{}^{}", name, e));
        }
    }
    parts.join("*")
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{}", mag)?;
            } else if mag.is_one() {
                write!(f, "{}", mono_string(m))?;
            } else {
                write!(f, "{}*{}", mag, mono_string(m))?;
            }
        }
        Ok(())
    }
}

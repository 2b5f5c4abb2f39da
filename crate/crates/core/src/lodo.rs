//! Ordinary differential operators in one derivation `D = d/dv` with
//! rational-function coefficients.
//!
//! The ring `K(v)[D]` is noncommutative — composition obeys `D∘f = f·D + f'`
//! — but keeps a two-sided Euclidean division, hence one-sided gcds and lcms,
//! Bézout solving, and the whole transformation calculus built on them.
//! Coefficients may involve further variables (parameters); only the
//! derivation variable is differentiated.

use std::collections::BTreeMap;
use std::fmt;

use crate::numfield::linalg;
use crate::numfield::{rat_int, rational_roots, MPoly, Rat, RatFunc, UniPoly, Var};
use crate::{Error, Result};

/// Which side an operation (division, gcd, lcm) works on.
///
/// `Right`: quotients sit on the left (`L = Q*M + R`), gcds are common
/// *right* divisors, lcms are common *left* multiples. `Left` is the mirror.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Right,
    Left,
}

/// Ore polynomial `sum_i coeffs[i] * D^i`; no trailing zero coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OrePoly {
    var: Var,
    coeffs: Vec<RatFunc>,
}

impl OrePoly {
    pub fn new(var: Var, mut coeffs: Vec<RatFunc>) -> OrePoly {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        OrePoly { var, coeffs }
    }

    pub fn zero(var: Var) -> OrePoly {
        OrePoly { var, coeffs: Vec::new() }
    }

    pub fn one(var: Var) -> OrePoly {
        OrePoly::constant(var, RatFunc::one())
    }

    /// The multiplication-by-`f` operator.
    pub fn constant(var: Var, f: RatFunc) -> OrePoly {
        OrePoly::new(var, vec![f])
    }

    /// The bare derivation `D`.
    pub fn d(var: Var) -> OrePoly {
        OrePoly::new(var, vec![RatFunc::zero(), RatFunc::one()])
    }

    pub fn d_pow(var: Var, k: usize) -> OrePoly {
        let mut coeffs = vec![RatFunc::zero(); k + 1];
        coeffs[k] = RatFunc::one();
        OrePoly::new(var, coeffs)
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

    /// Order of the operator; `None` for the zero operator.
    pub fn order(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn lc(&self) -> Option<&RatFunc> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &OrePoly) -> OrePoly {
        assert_eq!(self.var, other.var, "operators in different derivations");
        let n = self.coeffs.len().max(other.coeffs.len());
        OrePoly::new(self.var, (0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect())
    }

    pub fn sub(&self, other: &OrePoly) -> OrePoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> OrePoly {
        OrePoly { var: self.var, coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    pub fn scale(&self, f: &RatFunc) -> OrePoly {
        if f.is_zero() {
            return OrePoly::zero(self.var);
        }
        OrePoly { var: self.var, coeffs: self.coeffs.iter().map(|c| c.mul(f)).collect() }
    }

    /// Composition `self ∘ other`, the ring product.
    pub fn mul(&self, other: &OrePoly) -> OrePoly {
        assert_eq!(self.var, other.var, "operators in different derivations");
        let mut acc = OrePoly::zero(self.var);
        // cur = D^i ∘ other, maintained incrementally.
        let mut cur = other.clone();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                cur = d_compose(&cur);
            }
            if !c.is_zero() {
                acc = acc.add(&cur.scale(c));
            }
        }
        acc
    }

    /// Left-unit normalization `(1/lc)∘self`: monic with the same right
    /// divisors. The zero operator stays zero.
    pub fn monic(&self) -> OrePoly {
        match self.lc() {
            None => self.clone(),
            Some(f) => self.scale(&f.recip().expect("leading coefficient nonzero")),
        }
    }

    /// Right-unit normalization `self∘(1/lc)`: monic with the same left
    /// divisors.
    pub fn monic_right(&self) -> OrePoly {
        match self.lc() {
            None => self.clone(),
            Some(f) => self.mul(&OrePoly::constant(self.var, f.recip().expect("nonzero"))),
        }
    }

    /// Applies the operator to a rational function.
    pub fn apply(&self, f: &RatFunc) -> RatFunc {
        let mut acc = RatFunc::zero();
        let mut der = f.clone();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                der = der.diff(self.var);
            }
            acc = acc.add(&c.mul(&der));
        }
        acc
    }

    /// Formal adjoint `sum_i (-D)^i ∘ coeffs[i]`; an anti-homomorphism of
    /// the ring.
    pub fn adjoint(&self) -> OrePoly {
        let mut acc = OrePoly::zero(self.var);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let term = OrePoly::d_pow(self.var, i).mul(&OrePoly::constant(self.var, c.clone()));
            let sign = if i % 2 == 0 { rat_int(1) } else { rat_int(-1) };
            acc = acc.add(&term.scale(&RatFunc::from_rat(sign)));
        }
        acc
    }
}

/// `D ∘ p` in one step: shift the exponent and differentiate coefficients.
fn d_compose(p: &OrePoly) -> OrePoly {
    let mut coeffs = vec![RatFunc::zero(); p.coeffs.len() + 1];
    for (i, c) in p.coeffs.iter().enumerate() {
        coeffs[i + 1] = coeffs[i + 1].add(c);
        coeffs[i] = coeffs[i].add(&c.diff(p.var));
    }
    OrePoly::new(p.var, coeffs)
}

impl std::ops::Add for &OrePoly {
    type Output = OrePoly;
    fn add(self, rhs: &OrePoly) -> OrePoly {
        OrePoly::add(self, rhs)
    }
}
impl std::ops::Sub for &OrePoly {
    type Output = OrePoly;
    fn sub(self, rhs: &OrePoly) -> OrePoly {
        OrePoly::sub(self, rhs)
    }
}
impl std::ops::Mul for &OrePoly {
    type Output = OrePoly;
    fn mul(self, rhs: &OrePoly) -> OrePoly {
        OrePoly::mul(self, rhs)
    }
}

// ---------------------------------------------------------------------------
// Euclidean structure
// ---------------------------------------------------------------------------

/// Euclidean division: `L = Q*M + R` (`Side::Right`) or `L = M*Q + R`
/// (`Side::Left`), with `ord R < ord M`. Errors on `M = 0`.
pub fn divide(l: &OrePoly, m: &OrePoly, side: Side) -> Result<(OrePoly, OrePoly)> {
    let dm = m.order().ok_or(Error::ZeroOperator)?;
    let mlc = m.lc().unwrap();
    let mut r = l.clone();
    let mut q = OrePoly::zero(l.var);
    while let Some(dr) = r.order() {
        if dr < dm {
            break;
        }
        // In both sidednesses the product's leading coefficient is the
        // pointwise product of leading coefficients.
        let c = r.lc().unwrap().div(mlc)?;
        let t = OrePoly::d_pow(l.var, dr - dm).scale(&c);
        let prod = match side {
            Side::Right => t.mul(m),
            Side::Left => m.mul(&t),
        };
        r = r.sub(&prod);
        q = q.add(&t);
        debug_assert!(r.order().map_or(true, |d| d < dr));
    }
    Ok((q, r))
}

/// Remainder of the one-sided division.
pub fn remainder(l: &OrePoly, m: &OrePoly, side: Side) -> Result<OrePoly> {
    Ok(divide(l, m, side)?.1)
}

/// Extended Euclidean rows. For `Side::Right` the invariant is
/// `r = u*L + v*M`; for `Side::Left` it is `r = L*u + M*v`.
struct EuclidRow {
    r: OrePoly,
    u: OrePoly,
    v: OrePoly,
}

fn extended_euclid(l: &OrePoly, m: &OrePoly, side: Side) -> Result<(EuclidRow, EuclidRow)> {
    let var = l.var;
    let mut prev = EuclidRow { r: l.clone(), u: OrePoly::one(var), v: OrePoly::zero(var) };
    let mut cur = EuclidRow { r: m.clone(), u: OrePoly::zero(var), v: OrePoly::one(var) };
    while !cur.r.is_zero() {
        let (q, rem) = divide(&prev.r, &cur.r, side)?;
        let combine = |a: &OrePoly, b: &OrePoly| match side {
            Side::Right => a.sub(&q.mul(b)),
            Side::Left => a.sub(&b.mul(&q)),
        };
        let next = EuclidRow { r: rem, u: combine(&prev.u, &cur.u), v: combine(&prev.v, &cur.v) };
        prev = cur;
        cur = next;
    }
    // prev holds the gcd row, cur the zero row whose cofactors encode the lcm.
    Ok((prev, cur))
}

/// One-sided gcd and lcm with their Bézout data.
pub struct GcdLcm {
    /// Monic gcd: common right divisor for `Side::Right`, left for `Side::Left`.
    pub gcd: OrePoly,
    /// Monic lcm: common left multiple for `Side::Right`, right for `Side::Left`.
    /// Zero when one input is zero.
    pub lcm: OrePoly,
    /// `gcd = u*L + v*M` (right) or `gcd = L*u + M*v` (left),
    /// before monic normalization of `gcd`.
    pub raw_gcd: OrePoly,
    pub cofactors: (OrePoly, OrePoly),
}

/// Computes the one-sided gcd and lcm of `l` and `m` (not both zero).
pub fn gcd_lcm(l: &OrePoly, m: &OrePoly, side: Side) -> Result<GcdLcm> {
    if l.is_zero() && m.is_zero() {
        return Err(Error::InvalidArgument("gcd_lcm of two zero operators".into()));
    }
    if l.is_zero() || m.is_zero() {
        let g = if l.is_zero() { m } else { l };
        return Ok(GcdLcm {
            gcd: normalize(g, side),
            lcm: OrePoly::zero(l.var),
            raw_gcd: g.clone(),
            cofactors: if l.is_zero() {
                (OrePoly::zero(l.var), OrePoly::one(l.var))
            } else {
                (OrePoly::one(l.var), OrePoly::zero(l.var))
            },
        });
    }
    let (gcd_row, zero_row) = extended_euclid(l, m, side)?;
    let lcm_raw = match side {
        Side::Right => zero_row.u.mul(l),
        Side::Left => l.mul(&zero_row.u),
    };
    Ok(GcdLcm {
        gcd: normalize(&gcd_row.r, side),
        lcm: normalize(&lcm_raw, side),
        raw_gcd: gcd_row.r,
        cofactors: (gcd_row.u, gcd_row.v),
    })
}

/// Side-respecting monic normalization: a unit multiple that preserves the
/// divisibility property the respective gcd/lcm carries.
fn normalize(op: &OrePoly, side: Side) -> OrePoly {
    match side {
        Side::Right => op.monic(),
        Side::Left => op.monic_right(),
    }
}

/// Solves `X*L + Y*M = B` (`Side::Right`) or `L*X + M*Y = B` (`Side::Left`).
///
/// Solvable exactly when the one-sided gcd of `L` and `M` divides `B` on the
/// matching side; returns `None` otherwise.
pub fn bezout(l: &OrePoly, m: &OrePoly, b: &OrePoly, side: Side) -> Result<Option<(OrePoly, OrePoly)>> {
    let data = gcd_lcm(l, m, side)?;
    let g = &data.raw_gcd;
    if g.is_zero() {
        // Both inputs zero is rejected above; unreachable.
        return Ok(None);
    }
    let (c, rem) = divide(b, g, side)?;
    if !rem.is_zero() {
        return Ok(None);
    }
    let (u, v) = &data.cofactors;
    let (x, y) = match side {
        Side::Right => (c.mul(u), c.mul(v)),
        Side::Left => (u.mul(&c), v.mul(&c)),
    };
    Ok(Some((x, y)))
}

// ---------------------------------------------------------------------------
// Transformations and similarity
// ---------------------------------------------------------------------------

/// Certificate that `B` maps the solutions of `source` onto the solutions of
/// `target`, with the identities that witness it.
#[derive(Clone, Debug)]
pub struct TransformCert {
    pub source: OrePoly,
    pub b: OrePoly,
    /// Monic image operator of the same order as `source`.
    pub target: OrePoly,
    /// `lcm = target * b = lcm_cofactor * source` is the right lcm of
    /// `source` and `b` up to a left unit.
    pub lcm: OrePoly,
    pub lcm_cofactor: OrePoly,
    /// `b_inverse * b ≡ 1` modulo right multiples of `source`: the inverse
    /// mapping on solution spaces.
    pub b_inverse: OrePoly,
}

/// Builds the transformation of `l` by `b`, defined when `rGCD(l, b) = 1`;
/// returns `None` when the gcd has positive order (the map kills solutions).
pub fn transform(l: &OrePoly, b: &OrePoly) -> Result<Option<TransformCert>> {
    if l.order().unwrap_or(0) == 0 {
        return Err(Error::InvalidArgument("transform requires ord L >= 1".into()));
    }
    if b.is_zero() {
        return Err(Error::InvalidArgument("transform by the zero operator".into()));
    }
    let data = gcd_lcm(l, b, Side::Right)?;
    if data.raw_gcd.order() != Some(0) {
        return Ok(None);
    }
    // 1 = inv_g*(u*L + v*B), so (inv_g∘v) inverts B on solutions of L.
    let inv_g = OrePoly::constant(l.var, data.raw_gcd.coeff(0).recip()?);
    let b_inverse = inv_g.mul(&data.cofactors.1);

    let (l1_raw, rem) = divide(&data.lcm, b, Side::Right)?;
    debug_assert!(rem.is_zero(), "lcm is left-divisible by b");
    let target = l1_raw.monic();
    let lcm = target.mul(b);
    let (cof, rem2) = divide(&lcm, l, Side::Right)?;
    if !rem2.is_zero() || target.order() != l.order() {
        return Err(Error::VerificationFailed("transform certificate closure".into()));
    }
    Ok(Some(TransformCert { source: l.clone(), b: b.clone(), target, lcm, lcm_cofactor: cof, b_inverse }))
}

/// Exchanges the factors of the product `P∘Q`: finds `P1` with
/// `P*Q = P1*Q1` for the proposed right factor `Q1` (`ord Q1 = ord Q`).
/// `None` when `Q1` is not a right factor of that order.
pub fn interchange(p: &OrePoly, q: &OrePoly, q1: &OrePoly) -> Result<Option<OrePoly>> {
    if q1.is_zero() {
        return Err(Error::ZeroOperator);
    }
    if q1.order() != q.order() {
        return Ok(None);
    }
    let prod = p.mul(q);
    let (p1, rem) = divide(&prod, q1, Side::Right)?;
    if rem.is_zero() {
        Ok(Some(p1))
    } else {
        Ok(None)
    }
}

/// Searches for an operator `B` of order `< ord l` with polynomial
/// coefficients of degree `<= deg_cap` such that `transform(l, B)` lands on
/// the monic normalization of `m`. Best effort: a sound certificate when
/// found, `None` proves nothing.
pub fn find_transformer(l: &OrePoly, m: &OrePoly, deg_cap: u32) -> Result<Option<TransformCert>> {
    if l.order() != m.order() || l.order().unwrap_or(0) == 0 {
        return Ok(None);
    }
    let target = m.monic();
    let ord = l.order().unwrap();
    // Condition: rem(target ∘ B, l) = 0 is K-linear in B. Build the matrix
    // over Q for B in the span of x^j D^i.
    let mut basis = Vec::new();
    for i in 0..ord {
        for j in 0..=deg_cap {
            let mono = OrePoly::d_pow(l.var, i)
                .scale(&RatFunc::from_poly(MPoly::var_pow(l.var, j)));
            basis.push(mono);
        }
    }
    let rems: Vec<OrePoly> = basis
        .iter()
        .map(|e| remainder(&target.mul(e), l, Side::Right))
        .collect::<Result<_>>()?;
    // Each remainder has order < ord; stack the polynomial coefficients of
    // every remainder coefficient (over a common denominator) into rows.
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    for k in 0..ord {
        let mut den = MPoly::one();
        for r in &rems {
            den = den
                .mul(&r.coeff(k).den().clone())
                .divide_exact(&crate::numfield::poly_gcd(&den, r.coeff(k).den()))
                .expect("gcd divides product");
        }
        let numerators: Vec<MPoly> = rems
            .iter()
            .map(|r| {
                let c = r.coeff(k);
                c.num().mul(&den.divide_exact(c.den()).expect("lcm property"))
            })
            .collect();
        let mut monos = std::collections::BTreeSet::new();
        for n in &numerators {
            for (mono, _) in n.terms() {
                monos.insert(mono.clone());
            }
        }
        for mono in monos {
            rows.push(numerators.iter().map(|n| n.coeff(&mono)).collect());
        }
    }
    let null = linalg::nullspace(rows, basis.len());
    // Candidate combinations: each basis vector, then the all-ones mix.
    let mut candidates: Vec<Vec<Rat>> = null.clone();
    if null.len() > 1 {
        let mut sum = vec![Rat::from_integer(0.into()); basis.len()];
        for v in &null {
            for (s, c) in sum.iter_mut().zip(v) {
                *s += c;
            }
        }
        candidates.push(sum);
    }
    for cand in candidates {
        let mut b = OrePoly::zero(l.var);
        for (coef, e) in cand.iter().zip(&basis) {
            b = b.add(&e.scale(&RatFunc::from_rat(coef.clone())));
        }
        if b.is_zero() {
            continue;
        }
        if let Some(cert) = transform(l, &b)? {
            if cert.target == target {
                return Ok(Some(cert));
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Factorization chains
// ---------------------------------------------------------------------------

/// A claimed similarity between two factors of two chains, to be verified
/// via [`transform`].
#[derive(Clone, Debug)]
pub struct SimilarityWitness {
    pub chain_a: usize,
    pub index_a: usize,
    pub chain_b: usize,
    pub index_b: usize,
    pub b: OrePoly,
}

/// Outcome of comparing factorization chains of one operator.
#[derive(Clone, Debug)]
pub struct JhReport {
    /// Number of factors in each chain.
    pub lengths: Vec<usize>,
    /// Orders of the factors, outermost first, per chain.
    pub orders: Vec<Vec<usize>>,
    /// All chains have equally many factors.
    pub lengths_equal: bool,
    /// Per supplied witness: does `transform` carry factor A onto factor B?
    pub witness_verified: Vec<bool>,
}

/// Verifies that every chain multiplies back to `l` (outermost factor first)
/// with all factors of positive order, then compares chain lengths and any
/// similarity witnesses.
pub fn jh_check(l: &OrePoly, chains: &[Vec<OrePoly>], witnesses: &[SimilarityWitness]) -> Result<JhReport> {
    let mut lengths = Vec::new();
    let mut orders = Vec::new();
    for (ci, chain) in chains.iter().enumerate() {
        if chain.is_empty() {
            return Err(Error::InvalidArgument(format!("chain {ci} is empty")));
        }
        let mut prod = OrePoly::one(l.var);
        let mut ords = Vec::new();
        for f in chain {
            match f.order() {
                Some(o) if o >= 1 => ords.push(o),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "chain {ci} contains a factor of order 0"
                    )))
                }
            }
            prod = prod.mul(f);
        }
        if prod != *l {
            return Err(Error::FactorizationMismatch);
        }
        lengths.push(chain.len());
        orders.push(ords);
    }
    let lengths_equal = lengths.windows(2).all(|w| w[0] == w[1]);
    let mut witness_verified = Vec::new();
    for w in witnesses {
        let fa = chains
            .get(w.chain_a)
            .and_then(|c| c.get(w.index_a))
            .ok_or_else(|| Error::InvalidArgument("witness indexes missing factor".into()))?;
        let fb = chains
            .get(w.chain_b)
            .and_then(|c| c.get(w.index_b))
            .ok_or_else(|| Error::InvalidArgument("witness indexes missing factor".into()))?;
        let ok = match transform(fa, &w.b)? {
            Some(cert) => cert.target == fb.monic(),
            None => false,
        };
        witness_verified.push(ok);
    }
    Ok(JhReport { lengths, orders, lengths_equal, witness_verified })
}

// ---------------------------------------------------------------------------
// Rational kernels
// ---------------------------------------------------------------------------

/// Basis of the space of rational-function solutions of `l(y) = 0`, found
/// through local exponent bounds at the rational singularities and at
/// infinity. Denominators supported at irrational singular points are outside
/// this fragment and are not searched. Bounds above `cap` abort with
/// [`Error::BoundOverflow`].
pub fn rational_kernel(l: &OrePoly, cap: i64) -> Result<Vec<RatFunc>> {
    let v = l.var;
    if l.is_zero() {
        return Err(Error::InvalidArgument("kernel of the zero operator".into()));
    }
    for c in &l.coeffs {
        let mut vars = c.vars();
        vars.remove(&v);
        if !vars.is_empty() {
            return Err(Error::UnsupportedShape(
                "rational_kernel requires coefficients in the derivation variable only".into(),
            ));
        }
    }
    if l.order() == Some(0) {
        return Ok(Vec::new());
    }

    // Denominator bound: product of (v - a)^(bound_a) over rational roots of
    // the cleared leading coefficient.
    let polys = clear_denominators(l);
    let lead = polys.last().unwrap();
    let mut den_bound = MPoly::one();
    let mut roots = rational_roots(lead)?;
    roots.dedup();
    for alpha in roots {
        let b = local_bound(&polys, v, &alpha)?;
        if b > cap {
            return Err(Error::BoundOverflow { bound: b, cap });
        }
        let lin = MPoly::var(v).sub(&MPoly::constant(alpha));
        den_bound = den_bound.mul(&lin.pow(b as u32));
    }

    // Conjugate away the denominator and look for polynomial solutions.
    let den_rf = RatFunc::from_poly(den_bound.clone());
    let m = l.mul(&OrePoly::constant(v, den_rf.recip()?));
    let mpolys = clear_denominators(&m);
    let deg_bound = match degree_bound_at_infinity(&mpolys, v) {
        None => return Ok(Vec::new()),
        Some(n) => n,
    };
    if deg_bound > cap {
        return Err(Error::BoundOverflow { bound: deg_bound, cap });
    }

    // Linear system on the coefficients of a degree <= deg_bound polynomial.
    let n_unknowns = deg_bound as usize + 1;
    let mut rows_by_degree: BTreeMap<u32, Vec<Rat>> = BTreeMap::new();
    for k in 0..n_unknowns {
        let mut image = MPoly::zero();
        let mut der = MPoly::var_pow(v, k as u32);
        for (i, p) in mpolys.iter().enumerate() {
            if i > 0 {
                der = der.derivative(v);
            }
            image = image.add(&p.mul(&der));
        }
        for (mono, c) in image.terms() {
            let row = rows_by_degree
                .entry(mono.exp(v))
                .or_insert_with(|| vec![Rat::from_integer(0.into()); n_unknowns]);
            row[k] = c.clone();
        }
    }
    let rows: Vec<Vec<Rat>> = rows_by_degree.into_values().collect();
    let null = linalg::nullspace(rows, n_unknowns);

    let mut out = Vec::new();
    for sol in null {
        let mut num = MPoly::zero();
        for (k, c) in sol.iter().enumerate() {
            num = num.add(&MPoly::var_pow(v, k as u32).scale(c));
        }
        out.push(RatFunc::new(num, den_bound.clone())?);
    }
    Ok(out)
}

/// Coefficients of `l` over a common denominator, as polynomials.
fn clear_denominators(l: &OrePoly) -> Vec<MPoly> {
    let mut den = MPoly::one();
    for c in &l.coeffs {
        let g = crate::numfield::poly_gcd(&den, c.den());
        den = den.mul(&c.den().divide_exact(&g).expect("gcd divides"));
    }
    l.coeffs
        .iter()
        .map(|c| c.num().mul(&den.divide_exact(c.den()).expect("common denominator")))
        .collect()
}

/// Largest denominator exponent at the singular point `alpha`, from the
/// integer roots of the local indicial polynomial. Zero when regular.
fn local_bound(polys: &[MPoly], v: Var, alpha: &Rat) -> Result<i64> {
    // Valuation and first Taylor coefficient of each p_i at alpha.
    let mut data = Vec::new(); // (i, val_i, c_i)
    for (i, p) in polys.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let u = UniPoly::from_mpoly(p, v);
        let shift = UniPoly::new(v, vec![RatFunc::from_rat(-alpha.clone()), RatFunc::one()]);
        let mut cur = u;
        let mut val = 0i64;
        loop {
            let (q, r) = cur.divrem(&shift)?;
            if r.is_zero() && !q.is_zero() {
                val += 1;
                cur = q;
            } else {
                break;
            }
        }
        let c = cur.eval(&RatFunc::from_rat(alpha.clone()));
        data.push((i as i64, val, c.as_constant().expect("constant coefficients")));
    }
    let m = data.iter().map(|(i, val, _)| val - i).min().expect("nonzero operator");
    // Indicial polynomial in s: sum of c_i * s(s-1)...(s-i+1) over the
    // carriers of the minimal slope.
    let mut indicial = UniPoly::zero(v);
    for (i, val, c) in &data {
        if val - i != m {
            continue;
        }
        let mut f = UniPoly::constant(v, RatFunc::from_rat(c.clone()));
        for k in 0..*i {
            let lin = UniPoly::new(v, vec![RatFunc::from_rat(-rat_int(k)), RatFunc::one()]);
            f = f.mul(&lin);
        }
        indicial = indicial.add(&f);
    }
    if indicial.is_zero() {
        // Degenerate: no constraint from this point (cannot happen for a
        // nonzero operator, the minimal-slope carriers survive).
        return Ok(0);
    }
    let s_roots = rational_roots(indicial.to_ratfunc().num())?;
    let bound = s_roots
        .iter()
        .filter(|r| r.is_integer())
        .map(|r| -r.to_integer())
        .filter(|n| *n > num::BigInt::from(0))
        .max();
    Ok(bound.map_or(0, |b| i64::try_from(&b).unwrap_or(i64::MAX)))
}

/// Degree bound for polynomial solutions from the indicial polynomial at
/// infinity; `None` when no nonnegative integer root exists (only the zero
/// polynomial solves).
fn degree_bound_at_infinity(polys: &[MPoly], v: Var) -> Option<i64> {
    let mut slope = i64::MIN;
    for (i, p) in polys.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        slope = slope.max(p.degree_in(v) as i64 - i as i64);
    }
    let mut indicial = UniPoly::zero(v);
    for (i, p) in polys.iter().enumerate() {
        if p.is_zero() || p.degree_in(v) as i64 - i as i64 != slope {
            continue;
        }
        let lc = p.univ_coeffs(v).pop().unwrap().as_constant().expect("constant");
        let mut f = UniPoly::constant(v, RatFunc::from_rat(lc));
        for k in 0..i {
            let lin = UniPoly::new(v, vec![RatFunc::from_rat(-rat_int(k as i64)), RatFunc::one()]);
            f = f.mul(&lin);
        }
        indicial = indicial.add(&f);
    }
    let roots = rational_roots(indicial.to_ratfunc().num()).ok()?;
    roots
        .iter()
        .filter(|r| r.is_integer())
        .map(|r| r.to_integer())
        .filter(|n| *n >= num::BigInt::from(0))
        .max()
        .map(|b| i64::try_from(&b).unwrap_or(i64::MAX))
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

pub(crate) fn needs_parens(s: &str) -> bool {
    let mut depth = 0usize;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            '+' | '-' if depth == 0 => return true,
            _ => {}
        }
    }
    false
}

/// Formats one sum term `coeff * power` with sign folding shared by the
/// operator displays. `power` is empty for the constant term.
pub(crate) fn fmt_term(
    f: &mut fmt::Formatter<'_>,
    first: &mut bool,
    coeff: &RatFunc,
    power: &str,
) -> fmt::Result {
    let neg = coeff.is_display_negative();
    let mag = if neg { coeff.neg() } else { coeff.clone() };
    if *first {
        if neg {
            write!(f, "-")?;
        }
        *first = false;
    } else if neg {
        write!(f, " - ")?;
    } else {
        write!(f, " + ")?;
    }
    let mag_str = mag.to_string();
    if power.is_empty() {
        if needs_parens(&mag_str) {
            return write!(f, "({})", mag_str);
        }
        return write!(f, "{}", mag_str);
    }
    if mag.is_one() {
        write!(f, "{}", power)
    } else if needs_parens(&mag_str) {
        write!(f, "({})*{}", mag_str, power)
    } else {
        write!(f, "{}*{}", mag_str, power)
    }
}

impl fmt::Display for OrePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let power = match i {
                0 => String::new(),
                1 => "D".to_string(),
                _ => format!("D^{}", i),
            };
            fmt_term(f, &mut first, c, &power)?;
        }
        Ok(())
    }
}

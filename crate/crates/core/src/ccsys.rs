//! First-order systems of linear PDEs with constant coefficients.
//!
//! The derivations are the two commuting symbols `Dx` and `Dy`, so the
//! operator ring is an ordinary commutative polynomial ring over `Q` and a
//! system is a module presentation over it: each equation is a row of
//! [`CcOperator`] entries, one per unknown, read as `Σⱼ pⱼ(Dx,Dy) uⱼ = 0`.
//!
//! The route to closed-form solutions mirrors the classical elimination
//! story:
//!
//! 1. [`groebner_eliminate`] completes the rows to a reduced module Gröbner
//!    basis under a position-over-term ordering ([`ModuleOrder`]). For
//!    generic rankings the basis exhibits a scalar equation in the
//!    lowest-ranked unknown alone.
//! 2. [`linear_factors`] peels affine-linear factors `αDx + βDy + γ` off the
//!    scalar operator, and [`solve_cc_scalar`] turns distinct factors into
//!    exponential modes `exp(-γ(αx+βy)/(α²+β²))·Φ(βx−αy)`.
//! 3. [`back_substitute`] walks the remaining equations and determines the
//!    other unknowns inside the same exponential class, re-parameterizing the
//!    arbitrary functions (`Φ ↦ σ(d/dw)Φ`) whenever a right-hand side is not
//!    directly divisible.
//! 4. [`apply_substitution`] rewrites a system in new unknowns `v = T·u` and
//!    certifies invertibility of `T` over the operator ring modulo the system
//!    by exhibiting the reverse map.
//!
//! Everything synthesized here is re-verified by substitution
//! ([`verify_system`]); since the systems are homogeneous, they are never
//! inconsistent — a constant equation in a single unknown merely forces that
//! unknown to vanish and is handled by the back-substitution step.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{Signed, Zero};

use crate::expr::{FuncDeriv, FuncSym, LinDiffExpr, SpecialNode};
use crate::lpdo::PDOp;
use crate::numfield::{
    constant_coeffs, poly_gcd, rat_int, rational_roots, var, var_name, MPoly, Mono, Rat, RatFunc,
    UniPoly, Var,
};
use crate::{Error, Result};

/// The two derivation symbols. They are ordinary registry variables; a
/// monomial `x^i y^j` inside a [`CcOperator`] stands for `Dx^i Dy^j`.
fn axes() -> (Var, Var) {
    (var("x"), var("y"))
}

// ---------------------------------------------------------------------------
// CcOperator
// ---------------------------------------------------------------------------

/// A polynomial in the commuting derivations `Dx`, `Dy` with constant
/// rational coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CcOperator {
    poly: MPoly,
}

impl CcOperator {
    /// Wraps a polynomial whose variables are the derivation symbols.
    /// Rejects polynomials mentioning anything besides `x` (for `Dx`) and
    /// `y` (for `Dy`).
    pub fn from_poly(poly: MPoly) -> Result<CcOperator> {
        let (vx, vy) = axes();
        for v in poly.vars() {
            if v != vx && v != vy {
                return Err(Error::UnsupportedShape(format!(
                    "derivation symbol D{} outside Dx, Dy",
                    var_name(v)
                )));
            }
        }
        Ok(CcOperator { poly })
    }

    /// Internal constructor for polynomials already known to respect the
    /// two-symbol invariant (row arithmetic never introduces variables).
    fn raw(poly: MPoly) -> CcOperator {
        CcOperator { poly }
    }

    pub fn zero() -> CcOperator {
        CcOperator::raw(MPoly::zero())
    }

    pub fn one() -> CcOperator {
        CcOperator::raw(MPoly::one())
    }

    pub fn constant(c: Rat) -> CcOperator {
        CcOperator::raw(MPoly::constant(c))
    }

    pub fn dx() -> CcOperator {
        CcOperator::raw(MPoly::var(axes().0))
    }

    pub fn dy() -> CcOperator {
        CcOperator::raw(MPoly::var(axes().1))
    }

    /// The affine-linear operator `α·Dx + β·Dy + γ`.
    pub fn linear(alpha: Rat, beta: Rat, gamma: Rat) -> CcOperator {
        let (vx, vy) = axes();
        let p = MPoly::var(vx)
            .scale(&alpha)
            .add(&MPoly::var(vy).scale(&beta))
            .add(&MPoly::constant(gamma));
        CcOperator::raw(p)
    }

    /// Reads the operator back as `(α, β, γ)` when it is affine-linear.
    pub fn as_linear(&self) -> Option<(Rat, Rat, Rat)> {
        if self.poly.total_degree().unwrap_or(0) > 1 {
            return None;
        }
        let (vx, vy) = axes();
        let a = self.poly.derivative(vx).as_constant()?;
        let b = self.poly.derivative(vy).as_constant()?;
        let lin = MPoly::var(vx).scale(&a).add(&MPoly::var(vy).scale(&b));
        let c = self.poly.sub(&lin).as_constant()?;
        Some((a, b, c))
    }

    pub fn poly(&self) -> &MPoly {
        &self.poly
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        self.poly.as_constant()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.poly.total_degree()
    }

    pub fn add(&self, other: &CcOperator) -> CcOperator {
        CcOperator::raw(self.poly.add(&other.poly))
    }

    pub fn sub(&self, other: &CcOperator) -> CcOperator {
        CcOperator::raw(self.poly.sub(&other.poly))
    }

    pub fn neg(&self) -> CcOperator {
        CcOperator::raw(self.poly.neg())
    }

    /// Commutative product — constant coefficients never see the Leibniz
    /// correction terms.
    pub fn mul(&self, other: &CcOperator) -> CcOperator {
        CcOperator::raw(self.poly.mul(&other.poly))
    }

    pub fn scale(&self, c: &Rat) -> CcOperator {
        CcOperator::raw(self.poly.scale(c))
    }

    /// The same operator as a (trivially constant-coefficient) partial
    /// differential operator.
    pub fn to_pdop(&self) -> PDOp {
        PDOp::from_terms(
            self.poly
                .terms()
                .map(|(m, c)| (m.clone(), RatFunc::from_rat(c.clone()))),
        )
    }

    /// Applies the operator to an expression.
    pub fn apply(&self, e: &LinDiffExpr) -> Result<LinDiffExpr> {
        crate::expr::apply_pdop(&self.to_pdop(), e)
    }
}

impl fmt::Display for CcOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        let mut terms: Vec<(&Mono, &Rat)> = self.poly.terms().collect();
        terms.sort_by(|a, b| b.0.cmp(a.0));
        let mut first = true;
        for (m, c) in terms {
            crate::lodo::fmt_term(
                f,
                &mut first,
                &RatFunc::from_rat(c.clone()),
                &crate::lpdo::dop_string(m),
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CcSystem
// ---------------------------------------------------------------------------

/// A homogeneous system `Σⱼ pᵢⱼ(Dx,Dy) uⱼ = 0`: one row of operators per
/// equation, one column per unknown.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CcSystem {
    unknowns: Vec<String>,
    equations: Vec<Vec<CcOperator>>,
}

impl CcSystem {
    pub fn new(unknowns: Vec<String>, equations: Vec<Vec<CcOperator>>) -> Result<CcSystem> {
        if unknowns.is_empty() {
            return Err(Error::InvalidArgument("a system needs at least one unknown".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &unknowns {
            if name.is_empty() || !seen.insert(name.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown names must be distinct and nonempty; offending name {name:?}"
                )));
            }
        }
        for row in &equations {
            if row.len() != unknowns.len() {
                return Err(Error::InvalidArgument(format!(
                    "equation has {} entries for {} unknowns",
                    row.len(),
                    unknowns.len()
                )));
            }
        }
        Ok(CcSystem { unknowns, equations })
    }

    pub fn unknowns(&self) -> &[String] {
        &self.unknowns
    }

    pub fn equations(&self) -> &[Vec<CcOperator>] {
        &self.equations
    }
}

impl fmt::Display for CcSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.equations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let mut first = true;
            for (j, op) in row.iter().enumerate() {
                if op.is_zero() {
                    continue;
                }
                let name = &self.unknowns[j];
                let terms: Vec<(&Mono, &Rat)> = op.poly.terms().collect();
                if terms.len() == 1 {
                    let (m, c) = terms[0];
                    let ds = crate::lpdo::dop_string(m);
                    let power = if ds.is_empty() { name.clone() } else { format!("{ds}*{name}") };
                    crate::lodo::fmt_term(f, &mut first, &RatFunc::from_rat(c.clone()), &power)?;
                } else {
                    if first {
                        first = false;
                    } else {
                        write!(f, " + ")?;
                    }
                    write!(f, "({op})*{name}")?;
                }
            }
            if first {
                write!(f, "0")?;
            }
            write!(f, " = 0")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Module ordering
// ---------------------------------------------------------------------------

/// Position-over-term ordering on module rows: unknowns are ranked (earlier
/// entries of `ranking` are higher, so any term in a higher-ranked unknown
/// beats every term in a lower-ranked one) and monomials inside a position
/// compare purely lexicographically along `vars` (earlier = more
/// significant).
///
/// [`ModuleOrder::standard`] ranks `u_n > … > u_1` with `Dx > Dy`.
#[derive(Clone, Debug)]
pub struct ModuleOrder {
    ranking: Vec<usize>,
    vars: Vec<Var>,
}

impl ModuleOrder {
    pub fn new(ranking: Vec<usize>, vars: Vec<Var>) -> Result<ModuleOrder> {
        let mut seen = vec![false; ranking.len()];
        for &p in &ranking {
            if p >= ranking.len() || seen[p] {
                return Err(Error::InvalidArgument(
                    "unknown ranking must be a permutation of the positions".into(),
                ));
            }
            seen[p] = true;
        }
        if vars.is_empty() {
            return Err(Error::InvalidArgument("variable ranking must be nonempty".into()));
        }
        let distinct: BTreeSet<Var> = vars.iter().copied().collect();
        if distinct.len() != vars.len() {
            return Err(Error::InvalidArgument("variable ranking must be duplicate-free".into()));
        }
        Ok(ModuleOrder { ranking, vars })
    }

    /// `u_n > … > u_1` over `n` unknowns, `Dx > Dy` inside each position.
    pub fn standard(unknowns: usize) -> ModuleOrder {
        let (vx, vy) = axes();
        ModuleOrder { ranking: (0..unknowns).rev().collect(), vars: vec![vx, vy] }
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Rank of a position: 0 is the highest-ranked unknown.
    fn rank_of(&self, pos: usize) -> usize {
        self.ranking.iter().position(|&p| p == pos).expect("position is ranked")
    }
}

// ---------------------------------------------------------------------------
// Row algebra (internal)
// ---------------------------------------------------------------------------

type Row = Vec<MPoly>;

fn lex_lead<'a>(p: &'a MPoly, vars: &[Var]) -> (&'a Mono, &'a Rat) {
    p.terms()
        .max_by(|a, b| a.0.cmp_lex(b.0, vars))
        .expect("leading term of a nonzero polynomial")
}

/// Leading term of a row under the position-over-term ordering.
fn row_lead<'a>(row: &'a [MPoly], ord: &ModuleOrder) -> Option<(usize, &'a Mono, &'a Rat)> {
    for &pos in &ord.ranking {
        if !row[pos].is_zero() {
            let (m, c) = lex_lead(&row[pos], &ord.vars);
            return Some((pos, m, c));
        }
    }
    None
}

fn row_is_zero(row: &[MPoly]) -> bool {
    row.iter().all(MPoly::is_zero)
}

fn row_monic(row: &mut Row, ord: &ModuleOrder) {
    let c = match row_lead(row, ord) {
        Some((_, _, c)) => c.clone(),
        None => return,
    };
    let inv = c.recip();
    for p in row.iter_mut() {
        *p = p.scale(&inv);
    }
}

/// Full normal form of `row` against `basis` (optionally skipping one index):
/// afterwards no term of any position is divisible by a basis leading term in
/// the same position. Each replacement swaps a term for strictly smaller ones
/// in the module ordering, so the loop terminates.
fn reduce_row(row: &mut Row, basis: &[Row], skip: Option<usize>, ord: &ModuleOrder) {
    'scan: loop {
        for (bi, g) in basis.iter().enumerate() {
            if Some(bi) == skip {
                continue;
            }
            let Some((gpos, gm, gc)) = row_lead(g, ord) else { continue };
            let (gm, gc) = (gm.clone(), gc.clone());
            let hit = row[gpos]
                .terms()
                .filter(|(m, _)| m.try_div(&gm).is_some())
                .max_by(|a, b| a.0.cmp_lex(b.0, &ord.vars))
                .map(|(m, c)| (m.clone(), c.clone()));
            if let Some((m, c)) = hit {
                let shift = m.try_div(&gm).expect("divisibility just checked");
                let k = &c / &gc;
                for (rp, gp) in row.iter_mut().zip(g.iter()) {
                    *rp = rp.sub(&gp.mul_mono(&shift, &k));
                }
                continue 'scan;
            }
        }
        break;
    }
}

/// S-vector of two rows; `None` when the leading positions differ (such pairs
/// can never cancel).
fn spair(a: &[MPoly], b: &[MPoly], ord: &ModuleOrder) -> Option<Row> {
    let (pa, ma, ca) = row_lead(a, ord)?;
    let (pb, mb, cb) = row_lead(b, ord)?;
    if pa != pb {
        return None;
    }
    let l = ma.lcm(mb);
    let sa = l.try_div(ma).expect("lcm is divisible");
    let sb = l.try_div(mb).expect("lcm is divisible");
    let (ka, kb) = (ca.recip(), cb.recip());
    Some(
        a.iter()
            .zip(b.iter())
            .map(|(pa_, pb_)| pa_.mul_mono(&sa, &ka).sub(&pb_.mul_mono(&sb, &kb)))
            .collect(),
    )
}

/// Rows sort with lower-ranked leading unknowns first and leading monomials
/// ascending inside a position — the order the classical basis displays use.
fn cmp_rows(a: &[MPoly], b: &[MPoly], ord: &ModuleOrder) -> Ordering {
    match (row_lead(a, ord), row_lead(b, ord)) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some((pa, ma, _)), Some((pb, mb, _))) => ord
            .rank_of(pb)
            .cmp(&ord.rank_of(pa))
            .then_with(|| ma.cmp_lex(mb, &ord.vars)),
    }
}

/// Buchberger completion plus inter-reduction: returns the unique reduced,
/// monic module Gröbner basis of the row span, deterministically sorted.
fn buchberger(mut rows: Vec<Row>, ord: &ModuleOrder) -> Vec<Row> {
    rows.retain(|r| !row_is_zero(r));
    for r in &mut rows {
        row_monic(r, ord);
    }
    let mut pairs: Vec<(usize, usize)> =
        (0..rows.len()).flat_map(|i| (0..i).map(move |j| (j, i))).collect();
    while let Some((i, j)) = pairs.pop() {
        let Some(mut s) = spair(&rows[i], &rows[j], ord) else { continue };
        reduce_row(&mut s, &rows, None, ord);
        if !row_is_zero(&s) {
            row_monic(&mut s, ord);
            let n = rows.len();
            pairs.extend((0..n).map(|k| (k, n)));
            rows.push(s);
        }
    }
    loop {
        let mut changed = false;
        for i in 0..rows.len() {
            let mut r = rows[i].clone();
            reduce_row(&mut r, &rows, Some(i), ord);
            if r != rows[i] {
                rows[i] = r;
                changed = true;
            }
        }
        rows.retain(|r| !row_is_zero(r));
        for r in &mut rows {
            row_monic(r, ord);
        }
        if !changed {
            break;
        }
    }
    rows.sort_by(|a, b| cmp_rows(a, b, ord));
    rows.dedup();
    rows
}

// ---------------------------------------------------------------------------
// Gröbner elimination
// ---------------------------------------------------------------------------

/// Completes the equations of `system` to the reduced module Gröbner basis
/// under `order`. The output spans the same module: every input equation
/// reduces to zero against it and vice versa. With the standard elimination
/// ranking, rows whose leading unknown is the lowest-ranked one involve that
/// unknown alone, exhibiting the scalar eliminant.
pub fn groebner_eliminate(system: &CcSystem, order: &ModuleOrder) -> Result<CcSystem> {
    if order.ranking.len() != system.unknowns.len() {
        return Err(Error::InvalidArgument(format!(
            "ordering ranks {} positions, system has {} unknowns",
            order.ranking.len(),
            system.unknowns.len()
        )));
    }
    let allowed: BTreeSet<Var> = order.vars.iter().copied().collect();
    for row in &system.equations {
        for op in row {
            for v in op.poly.vars() {
                if !allowed.contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "derivation D{} is not ranked by the ordering",
                        var_name(v)
                    )));
                }
            }
        }
    }
    let rows: Vec<Row> = system
        .equations
        .iter()
        .map(|r| r.iter().map(|op| op.poly.clone()).collect())
        .collect();
    let gb = buchberger(rows, order);
    let equations = gb
        .into_iter()
        .map(|r| r.into_iter().map(CcOperator::raw).collect())
        .collect();
    CcSystem::new(system.unknowns.clone(), equations)
}

// ---------------------------------------------------------------------------
// Linear factor extraction
// ---------------------------------------------------------------------------

/// Peels affine-linear factors `αDx + βDy + γ` off `p` until none divides the
/// rest, returning `(factors, remainder)` with `Π factors · remainder = p`
/// exactly. Candidate directions `(α, β)` come from the linear forms of the
/// top-degree homogeneous part (rational roots of its dehomogenization plus a
/// possible `Dy` content); `γ` is then a common rational root of the
/// coefficients of `p` specialized along `Dx = (−βDy − γ)/α`, verified by
/// exact division. Factors are normalized with leading coefficient 1, so the
/// remainder carries the overall constant.
pub fn linear_factors(p: &CcOperator) -> Result<(Vec<CcOperator>, CcOperator)> {
    if p.is_zero() {
        return Err(Error::InvalidArgument("linear_factors of the zero operator".into()));
    }
    let mut rem = p.poly.clone();
    let mut factors = Vec::new();
    'peel: while rem.total_degree().unwrap_or(0) >= 1 {
        for (alpha, beta) in direction_candidates(&rem)? {
            if let Some((factor, quo)) = peel_direction(&rem, &alpha, &beta)? {
                factors.push(CcOperator::raw(factor));
                rem = quo;
                continue 'peel;
            }
        }
        break;
    }
    Ok((factors, CcOperator::raw(rem)))
}

/// Directions `(α, β)` whose linear form divides the top homogeneous part —
/// a necessary condition for `αDx + βDy + γ` to divide the operator.
fn direction_candidates(p: &MPoly) -> Result<Vec<(Rat, Rat)>> {
    let (vx, vy) = axes();
    let d = p.total_degree().expect("nonzero operator");
    let mut dehom = MPoly::zero();
    let mut min_y = u32::MAX;
    for (m, c) in p.terms() {
        if m.degree() != d {
            continue;
        }
        min_y = min_y.min(m.exp(vy));
        dehom = dehom.add(&MPoly::var_pow(vx, m.exp(vx)).scale(c));
    }
    let mut out = Vec::new();
    if min_y >= 1 {
        out.push((rat_int(0), rat_int(1)));
    }
    let mut seen = BTreeSet::new();
    for r in rational_roots(&dehom)? {
        if seen.insert(r.clone()) {
            out.push((rat_int(1), -r));
        }
    }
    Ok(out)
}

/// Tries to find `γ` making `α·Dx + β·Dy + γ` an exact divisor of `p`.
fn peel_direction(p: &MPoly, alpha: &Rat, beta: &Rat) -> Result<Option<(MPoly, MPoly)>> {
    let (vx, vy) = axes();
    let g = var("@gamma");
    let mut map = BTreeMap::new();
    // Specialize p along the zero set of the candidate factor, with γ kept
    // symbolic: the factor divides p exactly when some rational γ kills the
    // specialization identically in the free derivation.
    let free = if alpha.is_zero() {
        let sub = RatFunc::var(g).scale(&(-beta.recip()));
        map.insert(vy, sub);
        vx
    } else {
        let sub = RatFunc::from_poly(MPoly::var(vy))
            .scale(&(-beta.clone()))
            .sub(&RatFunc::var(g))
            .scale(&alpha.recip());
        map.insert(vx, sub);
        vy
    };
    let spec = p.substitute(&map);
    let num = spec.num();
    if num.is_zero() {
        return Ok(None);
    }
    let mut common = MPoly::zero();
    for c in num.univ_coeffs(free) {
        common = poly_gcd(&common, &c);
    }
    let mut seen = BTreeSet::new();
    for r in rational_roots(&common)? {
        if !seen.insert(r.clone()) {
            continue;
        }
        let factor = MPoly::var(vx)
            .scale(alpha)
            .add(&MPoly::var(vy).scale(beta))
            .add(&MPoly::constant(r));
        if let Some(quo) = p.divide_exact(&factor) {
            return Ok(Some((factor, quo)));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Exponential solutions of factored scalar operators
// ---------------------------------------------------------------------------

/// General solution of `Π (αᵢDx + βᵢDy + γᵢ) u = 0` for pairwise
/// non-proportional affine-linear factors: each factor contributes one
/// exponential mode
///
/// ```text
/// exp(-γ(αx + βy)/(α² + β²)) · Φ(βx − αy)
/// ```
///
/// with a fresh arbitrary function `Φ`, the characteristic coordinate
/// normalized to a positive leading coefficient. (The factor annihilates its
/// mode because `αDx + βDy` maps the mode to `λ(α²+β²) + γ` times itself with
/// `λ = -γ/(α²+β²)`, and distinct factors commute past each other.) The gauge
/// is the symmetric one; any multiple of `(α, β)` added to the exponent along
/// the characteristic would do as well.
///
/// Proportional (repeated) factors would need polynomial prefactors outside
/// this class and are rejected.
pub fn solve_cc_scalar(factors: &[CcOperator]) -> Result<LinDiffExpr> {
    let mut used = BTreeSet::new();
    solve_scalar_named(factors, &mut used)
}

fn solve_scalar_named(factors: &[CcOperator], used: &mut BTreeSet<String>) -> Result<LinDiffExpr> {
    let mut lins = Vec::with_capacity(factors.len());
    for f in factors {
        let (a, b, c) = f.as_linear().ok_or_else(|| {
            Error::InvalidArgument(format!("factor {f} is not affine-linear in Dx, Dy"))
        })?;
        if a.is_zero() && b.is_zero() {
            return Err(Error::InvalidArgument(format!("factor {f} has no derivation part")));
        }
        lins.push((a, b, c));
    }
    for i in 0..lins.len() {
        for j in 0..i {
            if proportional(&lins[i], &lins[j]) {
                return Err(Error::RepeatedFactor(format!("{} and {}", factors[j], factors[i])));
            }
        }
    }
    let mut sum = LinDiffExpr::zero();
    for lin in &lins {
        let name = fresh_name(used);
        sum = sum.add(&exponential_mode(lin, &name));
    }
    Ok(sum)
}

fn proportional(a: &(Rat, Rat, Rat), b: &(Rat, Rat, Rat)) -> bool {
    let minor = |p: &Rat, q: &Rat, r: &Rat, s: &Rat| (p * s - q * r).is_zero();
    minor(&a.0, &a.1, &b.0, &b.1) && minor(&a.0, &a.2, &b.0, &b.2) && minor(&a.1, &a.2, &b.1, &b.2)
}

fn exponential_mode(lin: &(Rat, Rat, Rat), name: &str) -> LinDiffExpr {
    let (vx, vy) = axes();
    let (a, b, c) = lin;
    let norm = a * a + b * b;
    let lam = -(c / &norm);
    let exp_arg =
        RatFunc::from_poly(MPoly::var(vx).scale(a).add(&MPoly::var(vy).scale(b))).scale(&lam);
    let (mut w1, mut w2) = (b.clone(), -a.clone());
    let lead = if w1.is_zero() { w2.clone() } else { w1.clone() };
    if lead.is_negative() {
        w1 = -w1;
        w2 = -w2;
    }
    let w = RatFunc::from_poly(MPoly::var(vx).scale(&w1).add(&MPoly::var(vy).scale(&w2)));
    LinDiffExpr::exp_of(LinDiffExpr::from_ratfunc(exp_arg))
        .mul(&LinDiffExpr::func(name, vec![w]))
        .expect("a pure exponential times one function term stays linear")
}

fn fresh_name(used: &mut BTreeSet<String>) -> String {
    const BASE: [&str; 8] = ["F", "G", "H", "K", "M", "N", "P", "Q"];
    for b in BASE {
        if !used.contains(b) {
            used.insert(b.to_string());
            return b.to_string();
        }
    }
    for i in 1.. {
        let n = format!("F{i}");
        if !used.contains(&n) {
            used.insert(n.clone());
            return n;
        }
    }
    unreachable!("the name sequence is infinite")
}

// ---------------------------------------------------------------------------
// Exponential modes of an expression (internal)
// ---------------------------------------------------------------------------

/// One exponential family `exp(e)·Σ cₖ Φ⁽ᵏ⁾(w)` inside an expression. Within
/// a mode, `Dx` acts as multiplication by `s₁ + b₁·t` and `Dy` as `s₂ + b₂·t`
/// where `t = d/dw`, turning operator equations into divisibility questions
/// in `Q[t]`.
struct Mode {
    exp_arg: RatFunc,
    s: (Rat, Rat),
    func: Option<ModeFunc>,
    coeffs: Vec<Rat>,
}

struct ModeFunc {
    name: String,
    arg: RatFunc,
    b: (Rat, Rat),
}

/// Gradient of an affine polynomial in `x, y`; anything else is outside the
/// exponential class.
fn affine_gradient(r: &RatFunc, what: &str) -> Result<(Rat, Rat)> {
    let (vx, vy) = axes();
    let bad = || Error::UnsupportedShape(format!("{what} {r} is not affine in x and y"));
    let den = r.den().as_constant().ok_or_else(bad)?;
    let p = r.num().scale(&den.recip());
    let b1 = p.derivative(vx).as_constant().ok_or_else(bad)?;
    let b2 = p.derivative(vy).as_constant().ok_or_else(bad)?;
    let lin = MPoly::var(vx).scale(&b1).add(&MPoly::var(vy).scale(&b2));
    p.sub(&lin).as_constant().ok_or_else(bad)?;
    Ok((b1, b2))
}

fn modes_of(e: &LinDiffExpr) -> Result<Vec<Mode>> {
    let mut map: BTreeMap<(RatFunc, Option<(String, RatFunc)>), Mode> = BTreeMap::new();
    for (key, coeff) in e.terms() {
        let c = coeff.as_constant().ok_or_else(|| {
            Error::UnsupportedShape(format!(
                "coefficient {coeff} is not constant; the term leaves the exponential class"
            ))
        })?;
        let mut exp_arg = RatFunc::zero();
        for sp in &key.specials {
            match sp {
                SpecialNode::Exp(a) => {
                    let r = a.as_ratfunc().ok_or_else(|| {
                        Error::UnsupportedShape(
                            "exponent carries arbitrary-function terms".into(),
                        )
                    })?;
                    exp_arg = exp_arg.add(&r);
                }
                SpecialNode::Log(_) | SpecialNode::AntiDeriv(_, _) => {
                    return Err(Error::UnsupportedShape(
                        "logarithm or antiderivative factor outside the exponential class".into(),
                    ));
                }
            }
        }
        let s = affine_gradient(&exp_arg, "exponent")?;
        let (fid, order) = match &key.func {
            None => (None, 0usize),
            Some(fd) => {
                if fd.sym.arity() != 1 {
                    return Err(Error::UnsupportedShape(format!(
                        "function {} takes {} arguments; the exponential solver handles \
                         single-argument functions",
                        fd.sym.name,
                        fd.sym.arity()
                    )));
                }
                (Some((fd.sym.name.clone(), fd.sym.args[0].clone())), fd.orders[0] as usize)
            }
        };
        let func = match &fid {
            None => None,
            Some((n, arg)) => Some(ModeFunc {
                name: n.clone(),
                arg: arg.clone(),
                b: affine_gradient(arg, "function argument")?,
            }),
        };
        let entry = map.entry((exp_arg.clone(), fid)).or_insert(Mode {
            exp_arg,
            s,
            func,
            coeffs: Vec::new(),
        });
        if entry.coeffs.len() <= order {
            entry.coeffs.resize(order + 1, Rat::zero());
        }
        entry.coeffs[order] += c;
    }
    let modes: Vec<Mode> =
        map.into_values().filter(|m| m.coeffs.iter().any(|c| !c.is_zero())).collect();
    let mut names = BTreeSet::new();
    for m in &modes {
        if let Some(f) = &m.func {
            if !names.insert(f.name.clone()) {
                return Err(Error::UnsupportedShape(format!(
                    "function {} appears in two distinct exponential modes",
                    f.name
                )));
            }
        }
    }
    Ok(modes)
}

/// Particular solution of `op·u = rhs` inside the exponential class. Per mode
/// the equation becomes `q(t)·d(t) = c(t)` in `Q[t]` with
/// `q(t) = op(s₁+b₁t, s₂+b₂t)`. When `q` does not divide `c`, the mode's
/// arbitrary function is re-parameterized as `Φ ↦ σ(d/dw)Φ` with
/// `σ = q/gcd(q,c)` — substituted into every expression already solved, which
/// is what turns e.g. `F` into the combination `3F + F'` in the classical
/// displays — after which `d = c/gcd(q,c)` solves the rescaled equation. A
/// mode annihilated by `op` (`q = 0`) would need polynomial prefactors and is
/// rejected.
fn solve_exp_particular(
    op: &CcOperator,
    rhs: &LinDiffExpr,
    solved: &mut BTreeMap<usize, LinDiffExpr>,
) -> Result<LinDiffExpr> {
    let (vx, vy) = axes();
    if op.is_zero() {
        return Err(Error::InvalidArgument("cannot solve with the zero operator".into()));
    }
    let t = var("@t");
    let tv = RatFunc::var(t);
    let mut out = LinDiffExpr::zero();
    for mode in modes_of(rhs)? {
        let sx = RatFunc::from_rat(mode.s.0.clone());
        let sy = RatFunc::from_rat(mode.s.1.clone());
        match &mode.func {
            None => {
                let mut map = BTreeMap::new();
                map.insert(vx, sx);
                map.insert(vy, sy);
                let val = op
                    .poly
                    .substitute(&map)
                    .as_constant()
                    .expect("constant substitution of a constant-coefficient operator");
                if val.is_zero() {
                    return Err(Error::UnsupportedShape(format!(
                        "resonant right-hand side: {} annihilates the mode exp({})",
                        op, mode.exp_arg
                    )));
                }
                let part = LinDiffExpr::exp_of(LinDiffExpr::from_ratfunc(mode.exp_arg.clone()))
                    .scale(&RatFunc::from_rat(&mode.coeffs[0] / &val));
                out = out.add(&part);
            }
            Some(mf) => {
                let mut map = BTreeMap::new();
                map.insert(vx, sx.add(&tv.scale(&mf.b.0)));
                map.insert(vy, sy.add(&tv.scale(&mf.b.1)));
                let q_rf = op.poly.substitute(&map);
                let qden = q_rf.den().as_constant().expect("polynomial substitution");
                let q = UniPoly::from_mpoly(&q_rf.num().scale(&qden.recip()), t);
                if q.is_zero() {
                    return Err(Error::UnsupportedShape(format!(
                        "resonant right-hand side: {} annihilates the {} mode",
                        op, mf.name
                    )));
                }
                let c = UniPoly::new(
                    t,
                    mode.coeffs.iter().map(|r| RatFunc::from_rat(r.clone())).collect(),
                );
                let g = q.gcd(&c);
                let (sigma, sr) = q.divrem(&g)?;
                debug_assert!(sr.is_zero(), "gcd divides exactly");
                let d = if sigma.degree() == Some(0) {
                    let (d, r) = c.divrem(&q)?;
                    debug_assert!(r.is_zero(), "constant sigma means q divides c");
                    d
                } else {
                    // Re-parameterize Φ so the mode becomes solvable. The
                    // name is unique to this mode, so only the already-solved
                    // expressions need rewriting; the divided coefficient
                    // below is taken against the rescaled right-hand side.
                    let sig = constant_coeffs(&sigma).ok_or_else(|| {
                        Error::UnsupportedShape("non-constant re-parameterization".into())
                    })?;
                    for v in solved.values_mut() {
                        *v = v.subst_func(&mf.name, &sig, &mf.name)?;
                    }
                    let (d, r) = c.divrem(&g)?;
                    debug_assert!(r.is_zero(), "gcd divides c exactly");
                    d
                };
                let dk = constant_coeffs(&d).expect("constant mode coefficients");
                let mut part = LinDiffExpr::zero();
                for (k, dkv) in dk.iter().enumerate() {
                    if dkv.is_zero() {
                        continue;
                    }
                    let fd = FuncDeriv {
                        sym: FuncSym::new(mf.name.clone(), vec![mf.arg.clone()]),
                        orders: vec![k as u32],
                    };
                    part = part.add(&LinDiffExpr::func_deriv(fd).scale(&RatFunc::from_rat(dkv.clone())));
                }
                let part = LinDiffExpr::exp_of(LinDiffExpr::from_ratfunc(mode.exp_arg.clone()))
                    .mul(&part)?;
                out = out.add(&part);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Back-substitution
// ---------------------------------------------------------------------------

/// Extends seed solutions to the full solution vector of `basis`.
///
/// Unknowns are solved one at a time: an unknown is ready when some equation
/// involves it and otherwise only already-solved unknowns. The equation with
/// the lowest-degree operator on the unknown determines it via
/// [`solve_exp_particular`]; when that equation is the *only* one available,
/// the unknown is under-determined by it alone and the general homogeneous
/// solution of its operator (fresh arbitrary functions, one per linear
/// factor) is added. Re-parameterizations triggered along the way rewrite the
/// already-solved entries, including the seeds.
///
/// The assembled vector is verified against every equation of `basis` before
/// it is returned, so heuristic choices (which equation solves an unknown,
/// whether homogeneous freedom was added) can never produce a wrong answer —
/// only an error.
///
/// Passing an empty seed solves triangular systems outright; seeding the
/// scalar unknown with a solution of the eliminant covers the Gröbner route.
pub fn back_substitute(
    basis: &CcSystem,
    seed: &[(String, LinDiffExpr)],
) -> Result<BTreeMap<String, LinDiffExpr>> {
    let n = basis.unknowns.len();
    let index: BTreeMap<&str, usize> =
        basis.unknowns.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut solved: BTreeMap<usize, LinDiffExpr> = BTreeMap::new();
    let mut used_names = BTreeSet::new();
    for (name, e) in seed {
        let &j = index
            .get(name.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("seed names unknown {name}")))?;
        if solved.insert(j, e.clone()).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate seed for unknown {name}")));
        }
        collect_func_names(e, &mut used_names);
    }
    while solved.len() < n {
        let mut chosen = None;
        for j in 0..n {
            if solved.contains_key(&j) {
                continue;
            }
            let rows: Vec<usize> = basis
                .equations
                .iter()
                .enumerate()
                .filter(|(_, row)| {
                    !row[j].is_zero()
                        && row
                            .iter()
                            .enumerate()
                            .all(|(k, op)| k == j || op.is_zero() || solved.contains_key(&k))
                })
                .map(|(i, _)| i)
                .collect();
            if !rows.is_empty() {
                chosen = Some((j, rows));
                break;
            }
        }
        let Some((j, rows)) = chosen else {
            return Err(Error::UnsupportedShape(
                "no remaining equation isolates a single unsolved unknown".into(),
            ));
        };
        let solver = rows
            .iter()
            .copied()
            .min_by_key(|&i| (basis.equations[i][j].total_degree().unwrap_or(0), i))
            .expect("nonempty candidate list");
        let mut rhs = LinDiffExpr::zero();
        for (k, op) in basis.equations[solver].iter().enumerate() {
            if k != j && !op.is_zero() {
                rhs = rhs.sub(&op.apply(&solved[&k])?);
            }
        }
        let mut u = solve_exp_particular(&basis.equations[solver][j], &rhs, &mut solved)?;
        if rows.len() == 1 {
            let (fs, _) = linear_factors(&basis.equations[solver][j])?;
            if !fs.is_empty() {
                u = u.add(&solve_scalar_named(&fs, &mut used_names)?);
            }
        }
        collect_func_names(&u, &mut used_names);
        solved.insert(j, u);
    }
    let sol: BTreeMap<String, LinDiffExpr> =
        solved.into_iter().map(|(j, e)| (basis.unknowns[j].clone(), e)).collect();
    if !verify_system(basis, &sol)? {
        return Err(Error::VerificationFailed(
            "back-substituted vector does not solve the basis".into(),
        ));
    }
    Ok(sol)
}

fn collect_func_names(e: &LinDiffExpr, out: &mut BTreeSet<String>) {
    for (key, _) in e.terms() {
        if let Some(fd) = &key.func {
            out.insert(fd.sym.name.clone());
        }
        for sp in &key.specials {
            match sp {
                SpecialNode::Exp(a) | SpecialNode::AntiDeriv(_, a) => collect_func_names(a, out),
                SpecialNode::Log(_) => {}
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Substitution of unknowns
// ---------------------------------------------------------------------------

/// Result of [`apply_substitution`]: the rewritten system in the new
/// unknowns `v1…vn`, plus the certificate of invertibility — operators
/// expressing each original unknown in the new ones modulo the system,
/// `uᵢ = Σₖ back_map[i][k] · vₖ`.
#[derive(Clone, Debug)]
pub struct Substituted {
    pub system: CcSystem,
    pub back_map: Vec<Vec<CcOperator>>,
}

/// Rewrites `system` in the new unknowns `vᵢ = Σⱼ T[i][j] uⱼ`.
///
/// Both the original equations and the definition rows `vᵢ − Σ T[i][j]uⱼ`
/// are completed to a Gröbner basis that ranks every old unknown above every
/// new one; the rows free of old unknowns present the substituted system (in
/// Janet normal form), and the normal form of each `uᵢ` certifies
/// invertibility: if it still mentions an old unknown, `T` is not invertible
/// over the operator ring modulo the system relations.
pub fn apply_substitution(system: &CcSystem, t: &[Vec<CcOperator>]) -> Result<Substituted> {
    let n = system.unknowns.len();
    if t.len() != n || t.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(
            "substitution matrix must be square in the unknowns".into(),
        ));
    }
    let (vx, vy) = axes();
    let ranking: Vec<usize> = (0..n).rev().chain((n..2 * n).rev()).collect();
    let order = ModuleOrder::new(ranking, vec![vx, vy])?;
    let mut rows: Vec<Row> = Vec::with_capacity(system.equations.len() + n);
    for eq in &system.equations {
        let mut row: Row = eq.iter().map(|op| op.poly.clone()).collect();
        row.extend(std::iter::repeat_with(MPoly::zero).take(n));
        rows.push(row);
    }
    for (i, trow) in t.iter().enumerate() {
        let mut row: Row = trow.iter().map(|op| op.poly.neg()).collect();
        row.extend(std::iter::repeat_with(MPoly::zero).take(n));
        row[n + i] = MPoly::one();
        rows.push(row);
    }
    let gb = buchberger(rows, &order);
    let mut new_eqs = Vec::new();
    for r in &gb {
        if r[..n].iter().all(MPoly::is_zero) {
            new_eqs.push(r[n..].iter().cloned().map(CcOperator::raw).collect::<Vec<_>>());
        }
    }
    let mut back_map = Vec::with_capacity(n);
    for i in 0..n {
        let mut unit: Row = vec![MPoly::zero(); 2 * n];
        unit[i] = MPoly::one();
        reduce_row(&mut unit, &gb, None, &order);
        if unit[..n].iter().any(|p| !p.is_zero()) {
            return Err(Error::NonInvertibleSubstitution(format!(
                "{} is not recoverable from the new unknowns",
                system.unknowns[i]
            )));
        }
        back_map.push(unit[n..].iter().cloned().map(CcOperator::raw).collect::<Vec<_>>());
    }
    let new_names: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
    Ok(Substituted { system: CcSystem::new(new_names, new_eqs)?, back_map })
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Substitutes the solution map into every equation and tests for zero.
pub fn verify_system(system: &CcSystem, sol: &BTreeMap<String, LinDiffExpr>) -> Result<bool> {
    for name in &system.unknowns {
        if !sol.contains_key(name) {
            return Err(Error::InvalidArgument(format!("solution map is missing unknown {name}")));
        }
    }
    for row in &system.equations {
        let mut acc = LinDiffExpr::zero();
        for (j, op) in row.iter().enumerate() {
            if op.is_zero() {
                continue;
            }
            acc = acc.add(&op.apply(&sol[&system.unknowns[j]])?);
        }
        if !acc.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

//! Symbolic carrier for closed-form solutions of linear PDEs.
//!
//! A [`LinDiffExpr`] is a K-linear combination of *terms*, each a product of
//! a rational-function coefficient, at most one derivative of an arbitrary
//! function symbol (`F'(x)`, `φ₍₀,₁₎(x, xy−z)`, …), and a multiset of
//! special factors: formal antiderivatives, exponentials, and logarithms.
//! The class is closed under differentiation (with an explicit error where a
//! formal antiderivative cannot be differentiated) but *not* under
//! multiplication of two function-carrying expressions — the zero test is
//! decidable exactly because distinct function derivatives are treated as
//! linearly independent, and that reading is only sound for K-linear
//! expressions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lpdo::PDOp;
use crate::numfield::{var_name, Rat, RatFunc, Var};
use crate::{Error, Result};

/// An arbitrary function symbol applied to concrete arguments, e.g.
/// `F(x)` or `phi(x, x*y - z)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct FuncSym {
    pub name: String,
    pub args: Vec<RatFunc>,
}

impl FuncSym {
    pub fn new(name: impl Into<String>, args: Vec<RatFunc>) -> FuncSym {
        let sym = FuncSym { name: name.into(), args };
        assert!(!sym.args.is_empty(), "function symbols take at least one argument");
        sym
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

/// A slot-wise derivative of a function symbol: `orders[i]` derivatives with
/// respect to the i-th argument slot.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct FuncDeriv {
    pub sym: FuncSym,
    pub orders: Vec<u32>,
}

impl FuncDeriv {
    pub fn plain(sym: FuncSym) -> FuncDeriv {
        let orders = vec![0; sym.arity()];
        FuncDeriv { sym, orders }
    }

    fn bump(&self, slot: usize) -> FuncDeriv {
        let mut d = self.clone();
        d.orders[slot] += 1;
        d
    }
}

/// A non-rational factor: a formal antiderivative, an exponential, or a
/// logarithm.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum SpecialNode {
    /// `int(v; g)`: the antiderivative of `g` along `v`. It is defined by
    /// its derivative only; differentiation along any other variable that
    /// occurs in `g` is refused.
    AntiDeriv(Var, Box<LinDiffExpr>),
    /// `exp(a)`.
    Exp(Box<LinDiffExpr>),
    /// `log(q)` of a rational function.
    Log(RatFunc),
}

impl SpecialNode {
    fn carries_functions(&self) -> bool {
        match self {
            SpecialNode::AntiDeriv(_, g) => g.has_functions(),
            SpecialNode::Exp(a) => a.has_functions(),
            SpecialNode::Log(_) => false,
        }
    }

    fn free_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            SpecialNode::AntiDeriv(v, g) => {
                out.insert(*v);
                g.collect_free_vars(out);
            }
            SpecialNode::Exp(a) => a.collect_free_vars(out),
            SpecialNode::Log(q) => out.extend(q.vars()),
        }
    }
}

/// The multiplicative part of a term: at most one function derivative plus
/// sorted special factors (with exponentials already merged).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct TermKey {
    pub func: Option<FuncDeriv>,
    pub specials: Vec<SpecialNode>,
}

impl TermKey {
    fn pure() -> TermKey {
        TermKey { func: None, specials: Vec::new() }
    }

    fn is_functional(&self) -> bool {
        self.func.is_some() || self.specials.iter().any(SpecialNode::carries_functions)
    }

    /// Canonicalizes the special factors. Exponentials merge into a single
    /// node (`exp(a)·exp(b) = exp(a+b)`, `exp(0) = 1`); a vanishing factor
    /// (`log 1` or an antiderivative of zero) collapses the whole term,
    /// signalled by returning `None`.
    fn normalize(mut self) -> Option<TermKey> {
        let mut exp_arg = LinDiffExpr::zero();
        let mut rest = Vec::with_capacity(self.specials.len());
        for s in self.specials {
            match s {
                SpecialNode::Exp(a) => exp_arg = exp_arg.add(&a),
                SpecialNode::Log(q) if q.is_one() => return None,
                SpecialNode::AntiDeriv(_, g) if g.is_zero() => return None,
                other => rest.push(other),
            }
        }
        if !exp_arg.is_zero() {
            rest.push(SpecialNode::Exp(Box::new(exp_arg)));
        }
        rest.sort();
        self.specials = rest;
        Some(self)
    }
}

/// A K-linear combination of terms; see the module documentation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct LinDiffExpr {
    terms: BTreeMap<TermKey, RatFunc>,
}

impl LinDiffExpr {
    pub fn zero() -> LinDiffExpr {
        LinDiffExpr::default()
    }

    pub fn from_ratfunc(r: RatFunc) -> LinDiffExpr {
        let mut e = LinDiffExpr::zero();
        e.add_term(TermKey::pure(), r);
        e
    }

    pub fn one() -> LinDiffExpr {
        LinDiffExpr::from_ratfunc(RatFunc::one())
    }

    /// The undifferentiated symbol `name(args…)`.
    pub fn func(name: impl Into<String>, args: Vec<RatFunc>) -> LinDiffExpr {
        LinDiffExpr::func_deriv(FuncDeriv::plain(FuncSym::new(name, args)))
    }

    pub fn func_deriv(d: FuncDeriv) -> LinDiffExpr {
        assert_eq!(d.orders.len(), d.sym.arity(), "one derivative order per argument slot");
        let mut e = LinDiffExpr::zero();
        e.add_term(TermKey { func: Some(d), specials: Vec::new() }, RatFunc::one());
        e
    }

    pub fn antideriv(v: Var, integrand: LinDiffExpr) -> LinDiffExpr {
        LinDiffExpr::from_special(SpecialNode::AntiDeriv(v, Box::new(integrand)))
    }

    pub fn exp_of(arg: LinDiffExpr) -> LinDiffExpr {
        LinDiffExpr::from_special(SpecialNode::Exp(Box::new(arg)))
    }

    pub fn log_of(q: RatFunc) -> LinDiffExpr {
        LinDiffExpr::from_special(SpecialNode::Log(q))
    }

    fn from_special(s: SpecialNode) -> LinDiffExpr {
        let mut e = LinDiffExpr::zero();
        e.add_term(TermKey { func: None, specials: vec![s] }, RatFunc::one());
        e
    }

    fn add_term(&mut self, key: TermKey, coeff: RatFunc) {
        if coeff.is_zero() {
            return;
        }
        let Some(key) = key.normalize() else {
            return;
        };
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                let s = e.get().add(&coeff);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &RatFunc)> {
        self.terms.iter()
    }

    /// True iff the expression is identically zero. Distinct function
    /// derivative keys are linearly independent over K, so this is a
    /// complete decision procedure for the class.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_functions(&self) -> bool {
        self.terms.keys().any(TermKey::is_functional)
    }

    /// The expression as a plain rational function, when it is one.
    pub fn as_ratfunc(&self) -> Option<RatFunc> {
        if self.is_zero() {
            return Some(RatFunc::zero());
        }
        if self.terms.len() == 1 {
            let (k, c) = self.terms.iter().next().unwrap();
            if *k == TermKey::pure() {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add(&self, other: &LinDiffExpr) -> LinDiffExpr {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &LinDiffExpr) -> LinDiffExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> LinDiffExpr {
        LinDiffExpr { terms: self.terms.iter().map(|(k, c)| (k.clone(), c.neg())).collect() }
    }

    pub fn scale(&self, f: &RatFunc) -> LinDiffExpr {
        if f.is_zero() {
            return LinDiffExpr::zero();
        }
        let mut out = LinDiffExpr::zero();
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c.mul(f));
        }
        out
    }

    /// Product of two expressions. Fails with [`Error::NonlinearExpression`]
    /// if both factors carry arbitrary-function parts — the result would
    /// leave the K-linear class.
    pub fn mul(&self, other: &LinDiffExpr) -> Result<LinDiffExpr> {
        let mut out = LinDiffExpr::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                if ka.is_functional() && kb.is_functional() {
                    return Err(Error::NonlinearExpression);
                }
                let func = ka.func.clone().or_else(|| kb.func.clone());
                let mut specials = ka.specials.clone();
                specials.extend(kb.specials.iter().cloned());
                out.add_term(TermKey { func, specials }, ca.mul(cb));
            }
        }
        Ok(out)
    }

    fn collect_free_vars(&self, out: &mut BTreeSet<Var>) {
        for (k, c) in &self.terms {
            out.extend(c.vars());
            if let Some(d) = &k.func {
                for a in &d.sym.args {
                    out.extend(a.vars());
                }
            }
            for s in &k.specials {
                s.free_vars(out);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut out);
        out
    }

    /// Exact partial derivative along `v`.
    ///
    /// Fails with [`Error::UnderdeterminedDerivative`] when it would have to
    /// differentiate a formal antiderivative `int(w; g)`, `w ≠ v`, whose
    /// integrand involves `v`: the node is defined by its `w`-derivative
    /// only, so that value is genuinely not determined.
    pub fn diff(&self, v: Var) -> Result<LinDiffExpr> {
        let mut out = LinDiffExpr::zero();
        for (key, coeff) in &self.terms {
            // coefficient part
            out.add_term(key.clone(), coeff.diff(v));
            // function part: chain rule over argument slots
            if let Some(d) = &key.func {
                for (slot, arg) in d.sym.args.iter().enumerate() {
                    let darg = arg.diff(v);
                    if darg.is_zero() {
                        continue;
                    }
                    let bumped = TermKey { func: Some(d.bump(slot)), specials: key.specials.clone() };
                    out.add_term(bumped, coeff.mul(&darg));
                }
            }
            // special factors, one at a time
            for (j, s) in key.specials.iter().enumerate() {
                let without_j = || {
                    let mut ks = key.clone();
                    ks.specials.remove(j);
                    ks
                };
                match s {
                    SpecialNode::Log(q) => {
                        let dq = q.diff(v);
                        if dq.is_zero() {
                            continue;
                        }
                        out.add_term(without_j(), coeff.mul(&dq.div(q)?));
                    }
                    SpecialNode::Exp(a) => {
                        let da = a.diff(v)?;
                        if da.is_zero() {
                            continue;
                        }
                        // d exp(a) = exp(a)·da: the node survives.
                        let term = LinDiffExpr {
                            terms: BTreeMap::from([(key.clone(), coeff.clone())]),
                        };
                        out = out.add(&term.mul(&da)?);
                    }
                    SpecialNode::AntiDeriv(w, g) => {
                        if v == *w {
                            let term = LinDiffExpr {
                                terms: BTreeMap::from([(without_j(), coeff.clone())]),
                            };
                            out = out.add(&term.mul(g)?);
                        } else if g.free_vars().contains(&v) {
                            return Err(Error::UnderdeterminedDerivative {
                                var: var_name(v),
                                node: special_string(s),
                            });
                        }
                        // else the node is constant along v
                    }
                }
            }
        }
        Ok(out)
    }

    /// Replaces every derivative of the unary function `name` by the same
    /// derivative of `sigma(d/dt) new_name`, i.e. `F⁽ᵏ⁾ ↦ Σᵢ σᵢ·ρ⁽ᵏ⁺ⁱ⁾`.
    /// Used to re-parameterize an arbitrary function by another one.
    pub fn subst_func(&self, name: &str, sigma: &[Rat], new_name: &str) -> Result<LinDiffExpr> {
        let mut out = LinDiffExpr::zero();
        for (key, coeff) in &self.terms {
            let mut specials = Vec::with_capacity(key.specials.len());
            for s in &key.specials {
                specials.push(match s {
                    SpecialNode::AntiDeriv(w, g) => SpecialNode::AntiDeriv(
                        *w,
                        Box::new(g.subst_func(name, sigma, new_name)?),
                    ),
                    SpecialNode::Exp(a) => {
                        SpecialNode::Exp(Box::new(a.subst_func(name, sigma, new_name)?))
                    }
                    SpecialNode::Log(q) => SpecialNode::Log(q.clone()),
                });
            }
            match &key.func {
                Some(d) if d.sym.name == name => {
                    if d.sym.arity() != 1 {
                        return Err(Error::InvalidArgument(format!(
                            "subst_func targets unary functions; {name} has arity {}",
                            d.sym.arity()
                        )));
                    }
                    for (i, si) in sigma.iter().enumerate() {
                        let nd = FuncDeriv {
                            sym: FuncSym::new(new_name, d.sym.args.clone()),
                            orders: vec![d.orders[0] + i as u32],
                        };
                        out.add_term(
                            TermKey { func: Some(nd), specials: specials.clone() },
                            coeff.scale(si),
                        );
                    }
                }
                other => out.add_term(TermKey { func: other.clone(), specials }, coeff.clone()),
            }
        }
        Ok(out)
    }
}

impl std::ops::Add for &LinDiffExpr {
    type Output = LinDiffExpr;
    fn add(self, rhs: &LinDiffExpr) -> LinDiffExpr {
        LinDiffExpr::add(self, rhs)
    }
}
impl std::ops::Sub for &LinDiffExpr {
    type Output = LinDiffExpr;
    fn sub(self, rhs: &LinDiffExpr) -> LinDiffExpr {
        LinDiffExpr::sub(self, rhs)
    }
}

/// Applies an operator to an expression: `Σ f_mu · D^mu e`.
///
/// Mixed partials commute whenever all orderings are defined, but a formal
/// antiderivative can make one ordering defined and another not (its own
/// variable must be differentiated away first), so each monomial tries the
/// distinct orderings of its derivative sequence until one succeeds.
pub fn apply_pdop(l: &PDOp, e: &LinDiffExpr) -> Result<LinDiffExpr> {
    let mut out = LinDiffExpr::zero();
    for (mu, f) in l.terms() {
        let de = diff_mono(e, mu.exps())?;
        out = out.add(&de.scale(f));
    }
    Ok(out)
}

fn diff_mono(e: &LinDiffExpr, exps: &[u32]) -> Result<LinDiffExpr> {
    let mut counts: Vec<(Var, u32)> = exps
        .iter()
        .enumerate()
        .filter(|(_, e)| **e > 0)
        .map(|(i, e)| (crate::numfield::var_by_index(i), *e))
        .collect();
    if counts.is_empty() {
        return Ok(e.clone());
    }
    let mut first_err = None;
    let mut result = None;
    try_orderings(e, &mut counts, &mut result, &mut first_err);
    match result {
        Some(r) => Ok(r),
        None => Err(first_err.expect("at least one ordering was attempted")),
    }
}

fn try_orderings(
    e: &LinDiffExpr,
    counts: &mut Vec<(Var, u32)>,
    result: &mut Option<LinDiffExpr>,
    first_err: &mut Option<Error>,
) {
    if result.is_some() {
        return;
    }
    if counts.iter().all(|(_, c)| *c == 0) {
        *result = Some(e.clone());
        return;
    }
    for i in 0..counts.len() {
        if counts[i].1 == 0 {
            continue;
        }
        match e.diff(counts[i].0) {
            Ok(de) => {
                counts[i].1 -= 1;
                try_orderings(&de, counts, result, first_err);
                counts[i].1 += 1;
                if result.is_some() {
                    return;
                }
            }
            Err(err) => {
                if first_err.is_none() {
                    *first_err = Some(err);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Display
// ---------------------------------------------------------------------------

fn func_string(d: &FuncDeriv) -> String {
    let args: Vec<String> = d.sym.args.iter().map(|a| a.to_string()).collect();
    let args = args.join(", ");
    let total: u32 = d.orders.iter().sum();
    if total == 0 {
        format!("{}({})", d.sym.name, args)
    } else if d.sym.arity() == 1 && total <= 3 {
        format!("{}{}({})", d.sym.name, "'".repeat(total as usize), args)
    } else {
        let orders: Vec<String> = d.orders.iter().map(|o| o.to_string()).collect();
        format!("D[{},{}]({})", d.sym.name, orders.join(","), args)
    }
}

fn special_string(s: &SpecialNode) -> String {
    match s {
        SpecialNode::AntiDeriv(v, g) => format!("int({}; {})", var_name(*v), g),
        SpecialNode::Exp(a) => format!("exp({})", a),
        SpecialNode::Log(q) => format!("log({})", q),
    }
}

fn key_string(k: &TermKey) -> String {
    let mut parts = Vec::new();
    if let Some(d) = &k.func {
        parts.push(func_string(d));
    }
    parts.extend(k.specials.iter().map(special_string));
    parts.join("*")
}

impl fmt::Display for LinDiffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            crate::lodo::fmt_term(f, &mut first, c, &key_string(k))?;
        }
        Ok(())
    }
}

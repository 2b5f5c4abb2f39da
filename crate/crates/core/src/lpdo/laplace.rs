//! Laplace invariants, transformations, and cascades for second-order
//! hyperbolic operators with straight characteristics.
//!
//! The normalized operator is `L = DxDy + a·Dx + b·Dy + c`. Its Laplace
//! invariants are `h = a_x + ab − c` and `k = b_y + ab − c`, which measure
//! the failure of the two incomplete factorizations:
//!
//! ```text
//! L = (Dx + b)(Dy + a) − h = (Dy + a)(Dx + b) − k
//! ```
//!
//! When `h` (resp. `k`) is nonzero, the Laplace transformation rewrites the
//! equation in terms of `u₁ = (Dy + a)u` (resp. `u₋₁ = (Dx + b)u`), giving a
//! new operator of the same normalized shape. Iterating in both directions
//! yields the cascade; a direction terminates when its driving invariant
//! vanishes, and the terminal operator factors exactly.

use std::fmt;

use super::PDOp;
use crate::numfield::{Mono, RatFunc, Var};
use crate::{Error, Result};

/// A second-order operator in Laplace normal form `DxDy + a·Dx + b·Dy + c`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HyperbolicForm {
    pub x: Var,
    pub y: Var,
    pub a: RatFunc,
    pub b: RatFunc,
    pub c: RatFunc,
}

impl HyperbolicForm {
    pub fn new(x: Var, y: Var, a: RatFunc, b: RatFunc, c: RatFunc) -> HyperbolicForm {
        assert!(x < y, "normal form orders the derivation variables");
        HyperbolicForm { x, y, a, b, c }
    }

    /// The operator `DxDy + a·Dx + b·Dy + c`.
    pub fn operator(&self) -> PDOp {
        PDOp::from_terms([
            (Mono::var(self.x, 1).mul(&Mono::var(self.y, 1)), RatFunc::one()),
            (Mono::var(self.x, 1), self.a.clone()),
            (Mono::var(self.y, 1), self.b.clone()),
            (Mono::one(), self.c.clone()),
        ])
    }

    /// The Laplace invariants `(h, k) = (a_x + ab − c, b_y + ab − c)`.
    pub fn invariants(&self) -> (RatFunc, RatFunc) {
        let ab = self.a.mul(&self.b);
        let h = self.a.diff(self.x).add(&ab).sub(&self.c);
        let k = self.b.diff(self.y).add(&ab).sub(&self.c);
        (h, k)
    }

    pub fn h(&self) -> RatFunc {
        self.invariants().0
    }

    pub fn k(&self) -> RatFunc {
        self.invariants().1
    }
}

impl fmt::Display for HyperbolicForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.operator())
    }
}

/// The Laplace invariants of `form` as the pair `(h, k)`.
pub fn laplace_invariants(form: &HyperbolicForm) -> (RatFunc, RatFunc) {
    form.invariants()
}

/// Normalizes a second-order operator in two variables to Laplace form.
///
/// Requires exactly two derivation directions, total order two, vanishing
/// `Dx²` and `Dy²` coefficients, and divides through by the `DxDy`
/// coefficient (which preserves the kernel).
pub fn to_hyperbolic(op: &PDOp) -> Result<HyperbolicForm> {
    let dirs: Vec<Var> = op.deriv_vars().into_iter().collect();
    if dirs.len() != 2 {
        return Err(Error::NotHyperbolic(format!(
            "expected two derivation variables, found {}",
            dirs.len()
        )));
    }
    let (x, y) = (dirs[0], dirs[1]);
    if op.order() != Some(2) {
        return Err(Error::NotHyperbolic("expected an operator of order two".into()));
    }
    if !op.coeff(&Mono::var(x, 2)).is_zero() || !op.coeff(&Mono::var(y, 2)).is_zero() {
        return Err(Error::NotHyperbolic(
            "pure second derivatives present; characteristics are not straight".into(),
        ));
    }
    let m = op.coeff(&Mono::var(x, 1).mul(&Mono::var(y, 1)));
    debug_assert!(!m.is_zero(), "order two with zero square terms forces a DxDy term");
    let norm = op.scale(&m.recip()?);
    Ok(HyperbolicForm::new(
        x,
        y,
        norm.coeff(&Mono::var(x, 1)),
        norm.coeff(&Mono::var(y, 1)),
        norm.coeff(&Mono::one()),
    ))
}

/// The incomplete factorizations made exact by a vanishing invariant:
/// `h ≡ 0` gives `L = (Dx + b)(Dy + a)`, `k ≡ 0` gives `L = (Dy + a)(Dx + b)`.
/// Returns `None` when both invariants are nonzero.
pub fn naive_factor(form: &HyperbolicForm) -> Option<(PDOp, PDOp)> {
    let (h, k) = form.invariants();
    let dx_b = PDOp::dop(form.x).add(&PDOp::constant(form.b.clone()));
    let dy_a = PDOp::dop(form.y).add(&PDOp::constant(form.a.clone()));
    let pair = if h.is_zero() {
        (dx_b, dy_a)
    } else if k.is_zero() {
        (dy_a, dx_b)
    } else {
        return None;
    };
    debug_assert_eq!(pair.0.mul(&pair.1), form.operator());
    Some(pair)
}

/// Which way a transformation moves along the cascade.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    /// `u₁ = (Dy + a)u`, driven by `h`.
    Plus,
    /// `u₋₁ = (Dx + b)u`, driven by `k`.
    Minus,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Plus => write!(f, "plus"),
            Direction::Minus => write!(f, "minus"),
        }
    }
}

/// One transformation step: the resulting form with its invariants and the
/// substitutions linking kernels of the source and the target.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainStep {
    pub direction: Direction,
    /// The transformed operator in normal form.
    pub form: HyperbolicForm,
    /// Invariants of `form`.
    pub h: RatFunc,
    pub k: RatFunc,
    /// Maps kernel elements of the source to kernel elements of `form`.
    pub forward: PDOp,
    /// Maps kernel elements of `form` back to the source.
    pub backward: PDOp,
}

/// Performs one Laplace transformation of `form` in the given direction.
///
/// The new operator is computed by symbolic composition — for the plus
/// direction as `h·[(Dy + a)∘(1/h)∘(Dx + b) − 1]` — and then re-normalized,
/// so the normal-form shape of the result is checked rather than assumed.
/// Fails with [`Error::VanishingInvariant`] when the driving invariant
/// (`h` for plus, `k` for minus) is zero.
pub fn laplace_step(form: &HyperbolicForm, direction: Direction) -> Result<ChainStep> {
    let (h, k) = form.invariants();
    let dx_b = PDOp::dop(form.x).add(&PDOp::constant(form.b.clone()));
    let dy_a = PDOp::dop(form.y).add(&PDOp::constant(form.a.clone()));
    let (inv, first, second) = match direction {
        Direction::Plus => (h, dy_a, dx_b),
        Direction::Minus => (k, dx_b, dy_a),
    };
    if inv.is_zero() {
        return Err(Error::VanishingInvariant(format!(
            "{direction} step requires a nonzero driving invariant"
        )));
    }
    let inv_op = PDOp::constant(inv.clone());
    let inv_recip = PDOp::constant(inv.recip()?);
    // new operator = inv·[first∘(1/inv)∘second − 1]
    let raw = inv_op.mul(&first.mul(&inv_recip.mul(&second)).sub(&PDOp::one()));
    let new_form = to_hyperbolic(&raw)?;
    let backward = inv_recip.mul(&second);
    debug_assert_eq!(new_form.operator(), raw, "composition already normalized");
    let (nh, nk) = new_form.invariants();
    Ok(ChainStep { direction, form: new_form, h: nh, k: nk, forward: first, backward })
}

/// The cascade of Laplace transformations around a central operator.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LaplaceChain {
    pub center: HyperbolicForm,
    /// Invariants `(h, k)` of the center.
    pub center_h: RatFunc,
    pub center_k: RatFunc,
    pub plus: Vec<ChainStep>,
    pub minus: Vec<ChainStep>,
    /// Whether the plus direction reached an operator with `h ≡ 0`.
    pub plus_terminated: bool,
    /// Whether the minus direction reached an operator with `k ≡ 0`.
    pub minus_terminated: bool,
}

impl LaplaceChain {
    pub fn step_counts(&self) -> (usize, usize) {
        (self.plus.len(), self.minus.len())
    }

    /// The last form in the given direction (the center for empty chains).
    pub fn terminal(&self, direction: Direction) -> &HyperbolicForm {
        let steps = match direction {
            Direction::Plus => &self.plus,
            Direction::Minus => &self.minus,
        };
        steps.last().map(|s| &s.form).unwrap_or(&self.center)
    }
}

/// Runs the cascade in both directions, stopping a direction when its
/// driving invariant vanishes or after `max_steps` transformations.
///
/// There is no general stopping criterion, so a capped, unterminated
/// direction is reported honestly via the termination flags rather than by
/// looping on.
pub fn laplace_cascade(center: &HyperbolicForm, max_steps: usize) -> Result<LaplaceChain> {
    let (center_h, center_k) = center.invariants();
    let run = |direction: Direction| -> Result<(Vec<ChainStep>, bool)> {
        let mut steps: Vec<ChainStep> = Vec::new();
        loop {
            let cur = steps.last().map(|s: &ChainStep| &s.form).unwrap_or(center);
            let driving = match direction {
                Direction::Plus => cur.h(),
                Direction::Minus => cur.k(),
            };
            if driving.is_zero() {
                return Ok((steps, true));
            }
            if steps.len() >= max_steps {
                return Ok((steps, false));
            }
            steps.push(laplace_step(cur, direction)?);
        }
    };
    let (plus, plus_terminated) = run(Direction::Plus)?;
    let (minus, minus_terminated) = run(Direction::Minus)?;
    Ok(LaplaceChain { center: center.clone(), center_h, center_k, plus, minus, plus_terminated, minus_terminated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpdo::principal_symbol;
    use crate::numfield::{rat_int, var, MPoly};

    fn x() -> Var {
        var("x")
    }
    fn y() -> Var {
        var("y")
    }
    fn xf() -> RatFunc {
        RatFunc::var(x())
    }
    fn yf() -> RatFunc {
        RatFunc::var(y())
    }

    /// `-2/(x+y)^2`, the potential of the first worked example.
    fn example1() -> HyperbolicForm {
        let xy = MPoly::var(x()).add(&MPoly::var(y()));
        let c = RatFunc::new(MPoly::constant(rat_int(-2)), xy.mul(&xy)).unwrap();
        HyperbolicForm::new(x(), y(), RatFunc::zero(), RatFunc::zero(), c)
    }

    fn generic_form() -> HyperbolicForm {
        // a = x, b = y, c = x*y + 1: h = 1 + xy - (xy+1) = 0 would be bad;
        // pick c = x+y instead so both invariants stay nonzero.
        HyperbolicForm::new(x(), y(), xf(), yf(), xf().add(&yf()))
    }

    #[test]
    fn incomplete_factorization_identities() {
        let f = generic_form();
        let (h, k) = f.invariants();
        let dx_b = PDOp::dop(x()).add(&PDOp::constant(f.b.clone()));
        let dy_a = PDOp::dop(y()).add(&PDOp::constant(f.a.clone()));
        assert_eq!(dx_b.mul(&dy_a), f.operator().add(&PDOp::constant(h)));
        assert_eq!(dy_a.mul(&dx_b), f.operator().add(&PDOp::constant(k)));
    }

    #[test]
    fn normalization_and_guards() {
        // 2DxDy + 2aDx normalizes to (a, 0, 0)
        let a = xf().mul(&yf());
        let op = PDOp::from_terms([
            (Mono::var(x(), 1).mul(&Mono::var(y(), 1)), RatFunc::int(2)),
            (Mono::var(x(), 1), a.scale(&rat_int(2))),
        ]);
        let f = to_hyperbolic(&op).unwrap();
        assert_eq!((f.a, f.b, f.c), (a, RatFunc::zero(), RatFunc::zero()));

        // Dx^2 + DxDy has a pure second derivative
        let bad = PDOp::from_terms([
            (Mono::var(x(), 2), RatFunc::one()),
            (Mono::var(x(), 1).mul(&Mono::var(y(), 1)), RatFunc::one()),
        ]);
        assert!(matches!(to_hyperbolic(&bad), Err(Error::NotHyperbolic(_))));
        // wrong order / wrong variable count
        assert!(to_hyperbolic(&PDOp::dop(x())).is_err());
        let three = PDOp::dop(x()).mul(&PDOp::dop(var("z"))).add(&PDOp::dop(y()).mul(&PDOp::dop(var("z"))));
        assert!(to_hyperbolic(&three).is_err());
    }

    #[test]
    fn invariants_and_naive_factorization() {
        // DxDy: h = k = 0, factorization (Dx, Dy)
        let f0 = to_hyperbolic(&PDOp::dop(x()).mul(&PDOp::dop(y()))).unwrap();
        assert_eq!(f0.invariants(), (RatFunc::zero(), RatFunc::zero()));
        let (l, r) = naive_factor(&f0).unwrap();
        assert_eq!((l, r), (PDOp::dop(x()), PDOp::dop(y())));

        // a product (Dy + x²)(Dx) has k = 0 by construction (and h = 2x ≠ 0,
        // so the k-branch is forced) and is recovered exactly
        let dy_a = PDOp::dop(y()).add(&PDOp::constant(xf().mul(&xf())));
        let dx_b = PDOp::dop(x());
        let f1 = to_hyperbolic(&dy_a.mul(&dx_b)).unwrap();
        assert!(f1.k().is_zero());
        assert!(!f1.h().is_zero());
        let (l1, r1) = naive_factor(&f1).unwrap();
        assert_eq!(l1.mul(&r1), f1.operator());
        assert_eq!((l1, r1), (dy_a, dx_b));

        // the worked example is not naively factorizable
        let e1 = example1();
        let (h, k) = e1.invariants();
        assert_eq!(h, e1.c.neg());
        assert_eq!(k, e1.c.neg());
        assert!(naive_factor(&e1).is_none());
    }

    #[test]
    fn step_intertwines_kernels() {
        // The defining identities of the transformation, as exact operator
        // equations: L₁∘forward = (Dy + a₁)∘L and L∘backward = (Dx+b)∘(1/h)∘L₁.
        let f = generic_form();
        let l = f.operator();
        let step = laplace_step(&f, Direction::Plus).unwrap();
        let l1 = step.form.operator();
        let dy_a1 = PDOp::dop(y()).add(&PDOp::constant(step.form.a.clone()));
        assert_eq!(l1.mul(&step.forward), dy_a1.mul(&l));
        let h = f.h();
        let n = PDOp::dop(x())
            .add(&PDOp::constant(f.b.clone()))
            .mul(&PDOp::constant(h.recip().unwrap()));
        assert_eq!(l.mul(&step.backward), n.mul(&l1));

        // invariant bookkeeping: k₁ = h, h₁ = 2h − k − (log h)_xy
        let (h0, k0) = f.invariants();
        assert_eq!(step.k, h0);
        let log_h_xy = h0.diff(y()).div(&h0).unwrap().diff(x());
        assert_eq!(step.h, h0.scale(&rat_int(2)).sub(&k0).sub(&log_h_xy));

        // mirrored identities for the minus direction
        let stepm = laplace_step(&f, Direction::Minus).unwrap();
        let lm = stepm.form.operator();
        let dx_bm = PDOp::dop(x()).add(&PDOp::constant(stepm.form.b.clone()));
        assert_eq!(lm.mul(&stepm.forward), dx_bm.mul(&l));
        assert_eq!(stepm.h, k0);
    }

    #[test]
    fn plus_then_minus_restores_invariants() {
        let f = generic_form();
        let (h, k) = f.invariants();
        let up = laplace_step(&f, Direction::Plus).unwrap();
        let back = laplace_step(&up.form, Direction::Minus).unwrap();
        assert_eq!(back.form.invariants(), (h, k));
    }

    #[test]
    fn step_errors_on_vanishing_invariant() {
        let f0 = to_hyperbolic(&PDOp::dop(x()).mul(&PDOp::dop(y()))).unwrap();
        assert!(matches!(laplace_step(&f0, Direction::Plus), Err(Error::VanishingInvariant(_))));
        assert!(matches!(laplace_step(&f0, Direction::Minus), Err(Error::VanishingInvariant(_))));
    }

    #[test]
    fn example1_cascade_terminates_in_one_step() {
        let e1 = example1();
        let chain = laplace_cascade(&e1, 12).unwrap();
        assert!(chain.plus_terminated && chain.minus_terminated);
        assert_eq!(chain.step_counts(), (1, 1));

        // frozen transformed form, computed by hand from the substitution:
        // a₁ = 2/(x+y), b₁ = 0, c₁ = −2/(x+y)², h₁ = 0, k₁ = 2/(x+y)²
        let step = &chain.plus[0];
        let xy = MPoly::var(x()).add(&MPoly::var(y()));
        let two_over = RatFunc::new(MPoly::constant(rat_int(2)), xy.clone()).unwrap();
        assert_eq!(step.form.a, two_over);
        assert!(step.form.b.is_zero());
        assert_eq!(step.form.c, e1.c);
        assert!(step.h.is_zero());
        assert_eq!(step.k, e1.c.neg());
        // mirrored in the minus direction
        let stepm = &chain.minus[0];
        assert!(stepm.form.a.is_zero());
        assert_eq!(stepm.form.b, two_over);
        assert!(stepm.k.is_zero());
    }

    #[test]
    fn constant_times_potential_family_runs_n_steps() {
        // c = −n(n+1)/(x+y)² terminates in n steps in both directions.
        let xy = MPoly::var(x()).add(&MPoly::var(y()));
        for n in 1..=3i64 {
            let c = RatFunc::new(MPoly::constant(rat_int(-n * (n + 1))), xy.mul(&xy)).unwrap();
            let f = HyperbolicForm::new(x(), y(), RatFunc::zero(), RatFunc::zero(), c);
            let chain = laplace_cascade(&f, 12).unwrap();
            assert!(chain.plus_terminated && chain.minus_terminated);
            assert_eq!(chain.step_counts(), (n as usize, n as usize));
        }
        // a non-integrable potential hits the cap un-terminated
        let c = RatFunc::new(MPoly::constant(rat_int(-1)), xy.mul(&xy)).unwrap();
        let f = HyperbolicForm::new(x(), y(), RatFunc::zero(), RatFunc::zero(), c);
        let chain = laplace_cascade(&f, 3).unwrap();
        assert!(!chain.plus_terminated && !chain.minus_terminated);
        assert_eq!(chain.step_counts(), (3, 3));
    }

    #[test]
    fn step_output_stays_normalized() {
        let f = generic_form();
        let step = laplace_step(&f, Direction::Plus).unwrap();
        let op = step.form.operator();
        assert!(op.coeff(&Mono::var(x(), 2)).is_zero());
        assert!(op.coeff(&Mono::var(y(), 2)).is_zero());
        assert!(op.coeff(&Mono::var(x(), 1).mul(&Mono::var(y(), 1))).is_one());
        assert_eq!(principal_symbol(&op).to_string(), "Dx*Dy");
    }
}

//! Temporary sizing probe; not part of the suite.

mod common;

use common::*;
use lindop::lodo::{OrePoly, Side};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner, TestCaseError};
use std::time::{Duration, Instant};

fn probe<S, F>(name: &str, cases: usize, strat: S, check: F)
where
    S: Strategy,
    S::Value: Clone,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let mut runner = TestRunner::new(Config {
        cases: cases as u32,
        failure_persistence: None,
        ..Config::default()
    });
    let mut total = Duration::ZERO;
    let mut max_case = Duration::ZERO;
    for _ in 0..cases {
        let v = strat.new_tree(&mut runner).unwrap().current();
        let t = Instant::now();
        check(v).unwrap();
        let case = t.elapsed();
        total += case;
        max_case = max_case.max(case);
    }
    eprintln!(
        "{name}: {:.2}s/1000 max-case {:?}",
        total.as_secs_f64() * (1000.0 / cases as f64),
        max_case
    );
}

/// Mixed pool for the gcd/lcm contract: biased toward pairs whose lcm stays
/// at order <= 3, plus pairs sharing a constructed common factor.
fn gcd_pool(side: Side) -> impl Strategy<Value = (OrePoly, OrePoly)> {
    let cap = match side {
        Side::Right => 2,
        Side::Left => 2,
    };
    let low = match side {
        Side::Right => 1,
        Side::Left => 1,
    };
    prop_oneof![
        3 => (arb_ore_nonzero(low), arb_ore_nonzero(cap)),
        3 => (arb_ore_nonzero(1), arb_ore_nonzero(1), arb_ore_nonzero(1)).prop_map(
            move |(a, b, g)| match side {
                Side::Right => (a.mul(&g), b.mul(&g)),
                Side::Left => (g.mul(&a), g.mul(&b)),
            }
        ),
        1 => (arb_ore_nonzero(2), arb_ore_nonzero(2)),
    ]
}

#[test]
fn probe_remaining() {
    probe("gcd_lcm right mixed", 200, gcd_pool(Side::Right), |(l, m)| {
        check_gcd_lcm_one_side((l, m), Side::Right)
    });
    probe("gcd_lcm left mixed", 200, gcd_pool(Side::Left), |(l, m)| {
        check_gcd_lcm_one_side((l, m), Side::Left)
    });
    probe(
        "transform",
        200,
        (
            arb_ore_nonzero(2).prop_filter("positive order", |l| l.order() >= Some(1)),
            arb_ore_nonzero(1),
        ),
        check_transform_closure,
    );
    probe("kernel", 200, arb_ore_poly_coeffs(2), check_kernel_annihilates);
    probe(
        "symbol_mult",
        300,
        (arb_pdop_nonzero(1, 3), arb_pdop_nonzero(1, 3)),
        check_symbol_multiplicative,
    );
    probe(
        "factor_symbol",
        300,
        (arb_linear_symbol(), arb_linear_symbol()),
        check_factor_symbol_reconstructs,
    );
    probe("laplace_shape", 200, arb_hyperbolic_h_nonzero(), check_laplace_step_shape);
    probe(
        "laplace_restore",
        200,
        arb_hyperbolic_h_nonzero(),
        check_laplace_restoration,
    );
    probe(
        "naive_factor",
        300,
        arb_hyperbolic_degenerate(),
        check_naive_factor_reconstructs,
    );
    probe("gb_module", 200, arb_cc_system(), check_gb_same_module);
    probe(
        "linear_factors",
        300,
        prop_oneof![
            arb_ccop(2, 4).prop_filter("nonzero operator", |p| !p.is_zero()),
            (arb_cc_factors(), arb_ccop(1, 2))
                .prop_filter("nonzero residue", |(_, p)| !p.is_zero())
                .prop_map(|(fs, p)| fs.iter().fold(p, |acc, f| acc.mul(f))),
        ],
        check_linear_factors_reconstruct,
    );
    probe("scalar_solve", 200, arb_cc_factors(), check_scalar_solution_annihilated);
    probe(
        "commutator",
        200,
        (
            arb_first_order(),
            arb_first_order(),
            arb_first_order(),
            arb_rat(),
            arb_rat(),
        ),
        check_commutator_algebra,
    );
    probe("decompose", 200, arb_dini_decompose(), check_decompose_reconstructs);
    probe(
        "expand_frame",
        200,
        arb_dini_frame().prop_flat_map(|(s1, s2)| {
            let coeff = || arb_mpoly(vec![vx(), vy(), vz()], 1, 2)
                .prop_map(lindop::numfield::RatFunc::from_poly);
            (Just(s1), Just(s2), coeff(), coeff(), coeff(), coeff())
        }),
        check_expand_in_frame,
    );
    probe("rt_ratfunc", 300, arb_ratfunc_xy(), check_ratfunc_roundtrip);
    probe("rt_ore", 300, arb_ore(2), check_ore_roundtrip);
    probe("rt_pdop", 300, arb_pdop(2, 3), check_pdop_roundtrip);
    probe("rt_expr", 300, arb_expr_full(), check_expr_roundtrip);
    probe("rt_system", 300, arb_cc_system_dense_head(), check_system_roundtrip);
}

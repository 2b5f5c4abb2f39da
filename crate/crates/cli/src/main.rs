//! Command front end: parses operator/expression/system arguments with the
//! library grammar, routes to the algebra, and prints one JSON document per
//! invocation.
//!
//! Output is always JSON with deterministic (sorted) key order — identical
//! argv and input produce byte-identical output.  The default layout is a
//! compact single line for machines; `--json` switches to an indented,
//! human-readable layout of the same document.  Results go to stdout; domain
//! errors print `{"error": ...}` to stderr and exit 1; usage errors exit 2.
//!
//! Multi-line inputs (systems, solution maps, substitutions) are UTF-8 text
//! with one equation or definition per line and `=` separating the sides;
//! passing `-` for such an argument reads it from stdin.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lindop::ccsys::{
    apply_substitution, back_substitute, groebner_eliminate, linear_factors, solve_cc_scalar,
    verify_system, CcOperator, CcSystem, ModuleOrder,
};
use lindop::dini::{
    beta_search, characteristic_decompose, dini_transform, riccati_residual, verify_dini_example,
    BetaAnsatz, FirstOrderOp,
};
use lindop::lodo::{
    bezout, divide, gcd_lcm, interchange, jh_check, rational_kernel, transform, OrePoly, Side,
};
use lindop::lpdo::{
    build_solution, factor_symbol, laplace_cascade, laplace_invariants, laplace_step,
    naive_factor, principal_symbol, to_hyperbolic, ChainStep, Direction, HyperbolicForm,
    LaplaceChain,
};
use lindop::numfield::{var, Var};
use lindop::parse::{
    parse_assignments, parse_expr, parse_lodo, parse_order, parse_pdop, parse_ratfunc,
    parse_substitution, parse_system,
};
use lindop::{Error, Result};

// ---------------------------------------------------------------------------
// Argument tree
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "lindop",
    version,
    about = "Exact factorization algebra for linear differential operators"
)]
struct Cli {
    /// Pretty-print the JSON output (compact single line by default).
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Univariate operators in K(x)[D]
    #[command(subcommand)]
    Lodo(LodoCmd),
    /// Partial differential operators, Laplace invariants, and cascades
    #[command(subcommand)]
    Lpdo(LpdoCmd),
    /// First-order systems with constant coefficients
    #[command(subcommand)]
    Ccsys(CcsysCmd),
    /// Dini transformations of trivariate operators
    #[command(subcommand)]
    Dini(DiniCmd),
}

/// Derivation variable of the univariate coefficient field.
#[derive(Args)]
struct VarOpt {
    /// Name of the derivation variable (D = d/d<var>).
    #[arg(long, default_value = "x")]
    var: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSide {
    Right,
    Left,
}

impl From<CliSide> for Side {
    fn from(s: CliSide) -> Side {
        match s {
            CliSide::Right => Side::Right,
            CliSide::Left => Side::Left,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliDirection {
    Plus,
    Minus,
}

impl From<CliDirection> for Direction {
    fn from(d: CliDirection) -> Direction {
        match d {
            CliDirection::Plus => Direction::Plus,
            CliDirection::Minus => Direction::Minus,
        }
    }
}

#[derive(Subcommand)]
enum LodoCmd {
    /// Noncommutative product A*B
    Mul {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[command(flatten)]
        var: VarOpt,
    },
    /// One-sided Euclidean division: A = Q*B + R (right) or A = B*Q + R (left)
    Divide {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(long, value_enum, default_value_t = CliSide::Right)]
        side: CliSide,
        #[command(flatten)]
        var: VarOpt,
    },
    /// One-sided greatest common divisor
    Gcd {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(long, value_enum, default_value_t = CliSide::Right)]
        side: CliSide,
        #[command(flatten)]
        var: VarOpt,
    },
    /// One-sided least common multiple
    Lcm {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(long, value_enum, default_value_t = CliSide::Right)]
        side: CliSide,
        #[command(flatten)]
        var: VarOpt,
    },
    /// Solve X*A + Y*B = T (right) or A*X + B*Y = T (left); T defaults to the gcd
    Bezout {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(allow_hyphen_values = true)]
        target: Option<String>,
        #[arg(long, value_enum, default_value_t = CliSide::Right)]
        side: CliSide,
        #[command(flatten)]
        var: VarOpt,
    },
    /// Transformation of L by B (defined when rGCD(L, B) = 1), with certificate
    Transform {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[command(flatten)]
        var: VarOpt,
    },
    /// Rewrite P*Q as P1*Q1 for a proposed right factor Q1
    Interchange {
        #[arg(allow_hyphen_values = true)]
        p: String,
        #[arg(allow_hyphen_values = true)]
        q: String,
        #[arg(allow_hyphen_values = true)]
        q1: String,
        #[command(flatten)]
        var: VarOpt,
    },
    /// Formal adjoint
    Adjoint {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[command(flatten)]
        var: VarOpt,
    },
    /// Basis of rational-function solutions of L(y) = 0
    Kernel {
        #[arg(allow_hyphen_values = true)]
        l: String,
        /// Cap on the local exponent bounds of the search.
        #[arg(long = "max-steps", default_value_t = 60)]
        max_steps: i64,
        #[command(flatten)]
        var: VarOpt,
    },
    /// Compare maximal factorization chains of L (factors separated by ';')
    Jhcheck {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(required = true, num_args = 1.., allow_hyphen_values = true)]
        chains: Vec<String>,
        #[command(flatten)]
        var: VarOpt,
    },
}

#[derive(Subcommand)]
enum LpdoCmd {
    /// Noncommutative product A*B
    Mul {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
    },
    /// Principal symbol (top-order part with commuting derivations)
    Symbol {
        #[arg(allow_hyphen_values = true)]
        l: String,
    },
    /// Factor the principal symbol into linear forms
    FactorSymbol {
        #[arg(allow_hyphen_values = true)]
        l: String,
    },
    /// Laplace normal form and invariants (h, k)
    Invariants {
        #[arg(allow_hyphen_values = true)]
        l: String,
    },
    /// The naive factorization made exact by a vanishing invariant
    NaiveFactor {
        #[arg(allow_hyphen_values = true)]
        l: String,
    },
    /// One Laplace transformation step
    Step {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(long, value_enum)]
        direction: CliDirection,
    },
    /// The two-sided cascade of Laplace transformations
    Cascade {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(long = "max-steps", default_value_t = 10)]
        max_steps: usize,
    },
    /// Complete solution of L(u) = 0 via a terminating cascade
    Solve {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(long = "max-steps", default_value_t = 10)]
        max_steps: usize,
    },
    /// Check that L annihilates the expression U
    Verify {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(allow_hyphen_values = true)]
        u: String,
    },
}

#[derive(Subcommand)]
enum CcsysCmd {
    /// Reduced module Groebner basis of the system
    Eliminate {
        #[arg(allow_hyphen_values = true)]
        system: String,
        /// Elimination order, e.g. "u3>u2>u1;Dx>Dy".
        #[arg(long)]
        order: Option<String>,
    },
    /// Linear factors of the scalar eliminant
    Factors {
        #[arg(allow_hyphen_values = true)]
        system: String,
        #[arg(long)]
        order: Option<String>,
    },
    /// Complete solution via elimination and back-substitution
    Solve {
        #[arg(allow_hyphen_values = true)]
        system: String,
        #[arg(long)]
        order: Option<String>,
    },
    /// Check a solution map ("name = expr" per line) against the system
    Verify {
        #[arg(allow_hyphen_values = true)]
        system: String,
        #[arg(allow_hyphen_values = true)]
        solution: String,
    },
    /// Rewrite the system in new unknowns ("new = T(old)" per line)
    Substitute {
        #[arg(allow_hyphen_values = true)]
        system: String,
        #[arg(allow_hyphen_values = true)]
        substitution: String,
    },
}

#[derive(Subcommand)]
enum DiniCmd {
    /// Characteristic decomposition L = S1*S2 + T + a with frame coefficients
    Decompose {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(allow_hyphen_values = true)]
        s1: String,
        #[arg(allow_hyphen_values = true)]
        s2: String,
    },
    /// Riccati admissibility of beta (or an ansatz search without --beta)
    Riccati {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(allow_hyphen_values = true)]
        s1: String,
        #[arg(allow_hyphen_values = true)]
        s2: String,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
    },
    /// The Dini transformation of L for admissible beta and alpha
    Transform {
        #[arg(allow_hyphen_values = true)]
        l: String,
        #[arg(allow_hyphen_values = true)]
        s1: String,
        #[arg(allow_hyphen_values = true)]
        s2: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        beta: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        alpha: String,
    },
    /// Run the canned trivariate worked example and report every check
    Example,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Outcome of one dispatch: process status, the JSON document, and any
/// diagnostics for stderr.
struct CommandResult {
    status: u8,
    payload: Value,
    diagnostics: Vec<String>,
}

fn dispatch(cmd: &Cmd) -> CommandResult {
    let mut notes = Vec::new();
    match run(cmd, &mut notes) {
        Ok(payload) => CommandResult {
            status: 0,
            payload,
            diagnostics: notes,
        },
        Err(e) => CommandResult {
            status: 1,
            payload: json!({ "error": e.to_string() }),
            diagnostics: notes,
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = dispatch(&cli.cmd);
    let rendered = if cli.json {
        serde_json::to_string_pretty(&res.payload)
    } else {
        serde_json::to_string(&res.payload)
    }
    .expect("JSON rendering cannot fail");
    // Tolerate closed pipes (e.g. `| head`): the exit status still reports
    // the command outcome.
    use std::io::Write;
    for note in &res.diagnostics {
        let _ = writeln!(std::io::stderr(), "note: {note}");
    }
    let _ = if res.status == 0 {
        writeln!(std::io::stdout(), "{rendered}")
    } else {
        writeln!(std::io::stderr(), "{rendered}")
    };
    ExitCode::from(res.status)
}

fn run(cmd: &Cmd, notes: &mut Vec<String>) -> Result<Value> {
    match cmd {
        Cmd::Lodo(c) => run_lodo(c),
        Cmd::Lpdo(c) => run_lpdo(c, notes),
        Cmd::Ccsys(c) => run_ccsys(c),
        Cmd::Dini(c) => run_dini(c),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn s<T: std::fmt::Display>(t: &T) -> Value {
    Value::String(t.to_string())
}

/// Resolves a `--var` name to an interned variable; derivation symbols and
/// function keywords cannot double as field variables.
fn main_var(opt: &VarOpt) -> Result<Var> {
    let name = opt.var.as_str();
    let well_formed = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !well_formed || matches!(name, "D" | "Dx" | "Dy" | "Dz" | "int" | "exp" | "log") {
        return Err(Error::InvalidArgument(format!(
            "'{name}' cannot be the derivation variable"
        )));
    }
    Ok(var(name))
}

/// Returns the argument itself, or the whole of stdin when it is `-`.
fn input_text(arg: &str) -> Result<String> {
    if arg != "-" {
        return Ok(arg.to_string());
    }
    let mut text = String::new();
    std::io::Read::read_to_string(&mut std::io::stdin(), &mut text)
        .map_err(|e| Error::InvalidArgument(format!("reading stdin: {e}")))?;
    Ok(text)
}

fn system_and_order(text: &str, order: &Option<String>) -> Result<(CcSystem, ModuleOrder)> {
    let sys = parse_system(&input_text(text)?)?;
    let ord = match order {
        Some(o) => parse_order(o, sys.unknowns())?,
        None => ModuleOrder::standard(sys.unknowns().len()),
    };
    Ok((sys, ord))
}

fn system_lines(sys: &CcSystem) -> Value {
    Value::Array(sys.to_string().split('\n').map(|l| Value::String(l.into())).collect())
}

fn op_strings(ops: &[CcOperator]) -> Value {
    Value::Array(ops.iter().map(|f| s(&f.to_pdop())).collect())
}

/// The scalar equation (single nonzero column) of an eliminated basis.
fn scalar_row(basis: &CcSystem) -> Result<(usize, &CcOperator)> {
    for row in basis.equations() {
        let nonzero: Vec<usize> =
            (0..row.len()).filter(|&j| !row[j].is_zero()).collect();
        if let [j] = nonzero.as_slice() {
            return Ok((*j, &row[*j]));
        }
    }
    Err(Error::UnsupportedShape(
        "the eliminated basis contains no scalar equation".into(),
    ))
}

// ---------------------------------------------------------------------------
// lodo
// ---------------------------------------------------------------------------

fn parse_chain(text: &str, v: Var) -> Result<Vec<OrePoly>> {
    text.split(';').map(|piece| parse_lodo(piece, v)).collect()
}

fn run_lodo(cmd: &LodoCmd) -> Result<Value> {
    match cmd {
        LodoCmd::Mul { a, b, var } => {
            let v = main_var(var)?;
            let prod = parse_lodo(a, v)?.mul(&parse_lodo(b, v)?);
            Ok(json!({ "product": s(&prod) }))
        }
        LodoCmd::Divide { a, b, side, var } => {
            let v = main_var(var)?;
            let (q, r) = divide(&parse_lodo(a, v)?, &parse_lodo(b, v)?, (*side).into())?;
            Ok(json!({ "quotient": s(&q), "remainder": s(&r) }))
        }
        LodoCmd::Gcd { a, b, side, var } => {
            let v = main_var(var)?;
            let data = gcd_lcm(&parse_lodo(a, v)?, &parse_lodo(b, v)?, (*side).into())?;
            let key = match side {
                CliSide::Right => "rgcd",
                CliSide::Left => "lgcd",
            };
            Ok(json!({ key: s(&data.gcd) }))
        }
        LodoCmd::Lcm { a, b, side, var } => {
            let v = main_var(var)?;
            let data = gcd_lcm(&parse_lodo(a, v)?, &parse_lodo(b, v)?, (*side).into())?;
            let key = match side {
                CliSide::Right => "rlcm",
                CliSide::Left => "llcm",
            };
            Ok(json!({ key: s(&data.lcm) }))
        }
        LodoCmd::Bezout { a, b, target, side, var } => {
            let v = main_var(var)?;
            let (pa, pb) = (parse_lodo(a, v)?, parse_lodo(b, v)?);
            let t = match target {
                Some(text) => parse_lodo(text, v)?,
                None => gcd_lcm(&pa, &pb, (*side).into())?.gcd,
            };
            match bezout(&pa, &pb, &t, (*side).into())? {
                Some((x, y)) => Ok(json!({
                    "solvable": true, "target": s(&t), "x": s(&x), "y": s(&y)
                })),
                None => Ok(json!({ "solvable": false, "target": s(&t) })),
            }
        }
        LodoCmd::Transform { l, b, var } => {
            let v = main_var(var)?;
            match transform(&parse_lodo(l, v)?, &parse_lodo(b, v)?)? {
                Some(cert) => Ok(json!({
                    "similar": true,
                    "target": s(&cert.target),
                    "lcm": s(&cert.lcm),
                    "lcm_cofactor": s(&cert.lcm_cofactor),
                    "b_inverse": s(&cert.b_inverse),
                })),
                None => Ok(json!({ "similar": false })),
            }
        }
        LodoCmd::Interchange { p, q, q1, var } => {
            let v = main_var(var)?;
            let (pp, pq, pq1) = (parse_lodo(p, v)?, parse_lodo(q, v)?, parse_lodo(q1, v)?);
            match interchange(&pp, &pq, &pq1)? {
                Some(p1) => Ok(json!({ "interchangeable": true, "p1": s(&p1) })),
                None => Ok(json!({ "interchangeable": false })),
            }
        }
        LodoCmd::Adjoint { l, var } => {
            let v = main_var(var)?;
            Ok(json!({ "adjoint": s(&parse_lodo(l, v)?.adjoint()) }))
        }
        LodoCmd::Kernel { l, max_steps, var } => {
            let v = main_var(var)?;
            let basis = rational_kernel(&parse_lodo(l, v)?, *max_steps)?;
            Ok(json!({
                "dimension": basis.len(),
                "kernel": basis.iter().map(|f| s(f)).collect::<Vec<_>>(),
            }))
        }
        LodoCmd::Jhcheck { l, chains, var } => {
            let v = main_var(var)?;
            let op = parse_lodo(l, v)?;
            let parsed: Vec<Vec<OrePoly>> =
                chains.iter().map(|c| parse_chain(c, v)).collect::<Result<_>>()?;
            let report = jh_check(&op, &parsed, &[])?;
            Ok(json!({
                "lengths": report.lengths,
                "orders": report.orders,
                "lengths_equal": report.lengths_equal,
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// lpdo
// ---------------------------------------------------------------------------

fn form_json(form: &HyperbolicForm) -> Value {
    let (h, k) = laplace_invariants(form);
    json!({
        "a": s(&form.a), "b": s(&form.b), "c": s(&form.c),
        "h": s(&h), "k": s(&k),
    })
}

fn step_json(index: usize, step: &ChainStep) -> Value {
    json!({
        "index": index + 1,
        "direction": step.direction.to_string(),
        "a": s(&step.form.a), "b": s(&step.form.b), "c": s(&step.form.c),
        "h": s(&step.h), "k": s(&step.k),
        "substitution": s(&step.forward),
        "inverse": s(&step.backward),
    })
}

fn chain_json(chain: &LaplaceChain) -> Value {
    json!({
        "center": form_json(&chain.center),
        "plus": chain.plus.iter().enumerate().map(|(i, st)| step_json(i, st)).collect::<Vec<_>>(),
        "minus": chain.minus.iter().enumerate().map(|(i, st)| step_json(i, st)).collect::<Vec<_>>(),
        "plus_terminated": chain.plus_terminated,
        "minus_terminated": chain.minus_terminated,
    })
}

fn run_lpdo(cmd: &LpdoCmd, notes: &mut Vec<String>) -> Result<Value> {
    match cmd {
        LpdoCmd::Mul { a, b } => {
            let prod = parse_pdop(a)?.mul(&parse_pdop(b)?);
            Ok(json!({ "product": s(&prod) }))
        }
        LpdoCmd::Symbol { l } => Ok(json!({ "symbol": s(&principal_symbol(&parse_pdop(l)?)) })),
        LpdoCmd::FactorSymbol { l } => {
            let sym = principal_symbol(&parse_pdop(l)?);
            match factor_symbol(&sym)? {
                Some(factors) => Ok(json!({
                    "factorable": true,
                    "symbol": s(&sym),
                    "factors": factors.iter().map(|f| s(f)).collect::<Vec<_>>(),
                })),
                None => Ok(json!({ "factorable": false, "symbol": s(&sym) })),
            }
        }
        LpdoCmd::Invariants { l } => {
            let form = to_hyperbolic(&parse_pdop(l)?)?;
            Ok(form_json(&form))
        }
        LpdoCmd::NaiveFactor { l } => {
            let form = to_hyperbolic(&parse_pdop(l)?)?;
            match naive_factor(&form) {
                Some((f, g)) => Ok(json!({
                    "factorable": true,
                    "factors": [s(&f), s(&g)],
                })),
                None => Ok(json!({ "factorable": false })),
            }
        }
        LpdoCmd::Step { l, direction } => {
            let form = to_hyperbolic(&parse_pdop(l)?)?;
            let step = laplace_step(&form, (*direction).into())?;
            Ok(step_json(0, &step))
        }
        LpdoCmd::Cascade { l, max_steps } => {
            let form = to_hyperbolic(&parse_pdop(l)?)?;
            let chain = laplace_cascade(&form, *max_steps)?;
            for (terminated, name) in
                [(chain.plus_terminated, "plus"), (chain.minus_terminated, "minus")]
            {
                if !terminated {
                    notes.push(format!(
                        "{name} direction capped at {max_steps} steps without termination"
                    ));
                }
            }
            Ok(chain_json(&chain))
        }
        LpdoCmd::Solve { l, max_steps } => {
            let form = to_hyperbolic(&parse_pdop(l)?)?;
            let chain = laplace_cascade(&form, *max_steps)?;
            let built = build_solution(&chain)?;
            Ok(json!({
                "solution": s(&built.solution),
                "verified": !built.integration_fallback,
                "integration_fallback": built.integration_fallback,
                "plus_steps": chain.plus.len(),
                "minus_steps": chain.minus.len(),
            }))
        }
        LpdoCmd::Verify { l, u } => {
            let ok = lindop::lpdo::verify_solution(&parse_pdop(l)?, &parse_expr(u)?)?;
            Ok(json!({ "verified": ok }))
        }
    }
}

// ---------------------------------------------------------------------------
// ccsys
// ---------------------------------------------------------------------------

fn run_ccsys(cmd: &CcsysCmd) -> Result<Value> {
    match cmd {
        CcsysCmd::Eliminate { system, order } => {
            let (sys, ord) = system_and_order(system, order)?;
            let basis = groebner_eliminate(&sys, &ord)?;
            Ok(json!({
                "unknowns": sys.unknowns(),
                "basis": system_lines(&basis),
            }))
        }
        CcsysCmd::Factors { system, order } => {
            let (sys, ord) = system_and_order(system, order)?;
            let basis = groebner_eliminate(&sys, &ord)?;
            let (j, eliminant) = scalar_row(&basis)?;
            let (factors, remainder) = linear_factors(eliminant)?;
            Ok(json!({
                "unknown": sys.unknowns()[j],
                "eliminant": s(&eliminant.to_pdop()),
                "factors": op_strings(&factors),
                "remainder": s(&remainder.to_pdop()),
            }))
        }
        CcsysCmd::Solve { system, order } => {
            let (sys, ord) = system_and_order(system, order)?;
            let basis = groebner_eliminate(&sys, &ord)?;
            let mut seed = Vec::new();
            if let Ok((j, eliminant)) = scalar_row(&basis) {
                let (factors, remainder) = linear_factors(eliminant)?;
                if remainder != CcOperator::one() {
                    return Err(Error::UnsupportedShape(
                        "the scalar eliminant does not factor into linear operators".into(),
                    ));
                }
                seed.push((sys.unknowns()[j].clone(), solve_cc_scalar(&factors)?));
            }
            let sol = back_substitute(&basis, &seed)?;
            let verified = verify_system(&sys, &sol)?;
            let map: serde_json::Map<String, Value> =
                sol.iter().map(|(name, e)| (name.clone(), s(e))).collect();
            Ok(json!({ "solution": map, "verified": verified }))
        }
        CcsysCmd::Verify { system, solution } => {
            let sys = parse_system(&input_text(system)?)?;
            let assignments = parse_assignments(&input_text(solution)?)?;
            let mut map: BTreeMap<String, lindop::expr::LinDiffExpr> = BTreeMap::new();
            for (name, e) in assignments {
                if !sys.unknowns().contains(&name) {
                    return Err(Error::InvalidArgument(format!(
                        "'{name}' is not an unknown of the system"
                    )));
                }
                map.insert(name, e);
            }
            Ok(json!({ "verified": verify_system(&sys, &map)? }))
        }
        CcsysCmd::Substitute { system, substitution } => {
            let sys = parse_system(&input_text(system)?)?;
            let (names, rows) = parse_substitution(&input_text(substitution)?, sys.unknowns())?;
            let sub = apply_substitution(&sys, &rows)?;
            let renamed = CcSystem::new(names.clone(), sub.system.equations().to_vec())?;
            Ok(json!({
                "unknowns": names,
                "system": system_lines(&renamed),
                "back_map": sub.back_map.iter().map(|row| op_strings(row)).collect::<Vec<_>>(),
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// dini
// ---------------------------------------------------------------------------

fn first_order(text: &str) -> Result<FirstOrderOp> {
    FirstOrderOp::from_pdop(&parse_pdop(text)?)
}

fn run_dini(cmd: &DiniCmd) -> Result<Value> {
    match cmd {
        DiniCmd::Decompose { l, s1, s2 } => {
            let dec =
                characteristic_decompose(&parse_pdop(l)?, &first_order(s1)?, &first_order(s2)?)?;
            Ok(json!({
                "t": s(&dec.t), "a": s(&dec.a),
                "k": s(&dec.k), "m": s(&dec.m), "n": s(&dec.n),
                "p": s(&dec.p), "q": s(&dec.q), "r": s(&dec.r),
            }))
        }
        DiniCmd::Riccati { l, s1, s2, beta } => {
            let dec =
                characteristic_decompose(&parse_pdop(l)?, &first_order(s1)?, &first_order(s2)?)?;
            match beta {
                Some(text) => {
                    let b = parse_ratfunc(text)?;
                    let residual = riccati_residual(&dec, &b);
                    Ok(json!({
                        "beta": s(&b),
                        "residual": s(&residual),
                        "admissible": residual.is_zero(),
                    }))
                }
                None => {
                    let mut found = BTreeSet::new();
                    found.extend(beta_search(&dec, &BetaAnsatz::Constants(2)));
                    found.extend(beta_search(&dec, &BetaAnsatz::ReciprocalLinear(2)));
                    Ok(json!({
                        "candidates": found.iter().map(|b| s(b)).collect::<Vec<_>>(),
                    }))
                }
            }
        }
        DiniCmd::Transform { l, s1, s2, beta, alpha } => {
            let tr = dini_transform(
                &parse_pdop(l)?,
                &first_order(s1)?,
                &first_order(s2)?,
                &parse_ratfunc(beta)?,
                &parse_ratfunc(alpha)?,
            )?;
            Ok(json!({
                "beta": s(&tr.beta), "alpha": s(&tr.alpha),
                "mu": s(&tr.mu), "nu": s(&tr.nu),
                "v": s(&tr.v), "b": s(&tr.b),
                "l1": s(&tr.l1),
            }))
        }
        DiniCmd::Example => {
            let report = verify_dini_example();
            Ok(json!({
                "all_passed": report.all_passed(),
                "checks": report
                    .checks
                    .iter()
                    .map(|c| json!({ "name": c.name, "passed": c.passed, "detail": c.detail }))
                    .collect::<Vec<_>>(),
            }))
        }
    }
}

//! Text front end: one small grammar, lowered per context.
//!
//! A single tokenizer and precedence parser produce an [`Ast`]; dedicated
//! lowering passes turn it into a rational function, a univariate operator,
//! a partial differential operator, a symbolic solution expression, or a
//! constant-coefficient system.  The context decides which node kinds are
//! legal: derivation symbols (`D`, `Dx`, `Dy`, `Dz`) are reserved
//! identifiers everywhere, but only meaningful in operator contexts, and
//! arbitrary-function syntax (`F(x)`, `F''(x)`, `D[phi,0,1](x, x*y - z)`,
//! `int(x; ...)`, `exp(...)`, `log(...)`) is only meaningful in expression
//! context.
//!
//! Precedence is standard: `+`/`-` bind loosest, then `*`/`/` (left
//! associative), then `^` (integer literal exponents only), then atoms.
//! Unary minus applies to a whole product: `-a*b + c` is `(-(a*b)) + c` and
//! `-x^2` is `-(x^2)`.  Operator products preserve the written order, so
//! `Dx*x` and `x*Dx` lower to different (Leibniz-normalized) operators.
//!
//! Every error is position-annotated with a byte offset into the input.
//! The grammar round-trips the `Display` output of all five value types.

use std::collections::BTreeMap;
use std::str::FromStr;

use num::{BigInt, Zero};

use crate::ccsys::{CcOperator, CcSystem, ModuleOrder};
use crate::expr::{FuncDeriv, FuncSym, LinDiffExpr};
use crate::lodo::OrePoly;
use crate::lpdo::PDOp;
use crate::numfield::{var, MPoly, Mono, Rat, RatFunc, Var};
use crate::{Error, Result};

/// Largest exponent accepted on an operator-valued base.
const MAX_OP_POW: u32 = 64;

fn perr(pos: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        pos,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// Syntax tree
// ---------------------------------------------------------------------------

/// A parsed node with the byte offset of its head token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ast {
    pub pos: usize,
    pub kind: AstKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstKind {
    /// A nonnegative integer literal (sign lives in [`AstKind::Neg`]).
    Number(String),
    /// A non-reserved identifier in value position.
    Variable(String),
    /// One of the reserved derivation symbols `D`, `Dx`, `Dy`, `Dz`.
    Derivation(String),
    /// `name(args)`, `name''(arg)`, or `D[name,orders](args)`; `orders` is
    /// slot-wise and the same length as `args`.
    Call {
        name: String,
        orders: Vec<u32>,
        args: Vec<Ast>,
    },
    /// `int(v; body)`.
    AntiDeriv { var: String, body: Box<Ast> },
    /// `exp(body)`.
    Exp(Box<Ast>),
    /// `log(body)`.
    Log(Box<Ast>),
    Neg(Box<Ast>),
    Bin {
        op: BinOp,
        lhs: Box<Ast>,
        rhs: Box<Ast>,
    },
    /// `base ^ exp` with a literal exponent.
    Pow { base: Box<Ast>, exp: u32 },
}

fn is_reserved(name: &str) -> bool {
    matches!(name, "D" | "Dx" | "Dy" | "Dz" | "int" | "exp" | "log")
}

fn is_derivation(name: &str) -> bool {
    matches!(name, "D" | "Dx" | "Dy" | "Dz")
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(String),
    Ident(String),
    Primes(u32),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
}

fn tok_name(t: &Tok) -> String {
    match t {
        Tok::Int(s) => format!("'{s}'"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Primes(_) => "'''".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Comma => "','".into(),
        Tok::Semi => "';'".into(),
    }
}

fn lex(text: &str, offset: usize) -> Result<Vec<(usize, Tok)>> {
    let mut toks = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        let pos = offset + i;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                it.next();
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&(_, d)) = it.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        it.next();
                    } else {
                        break;
                    }
                }
                toks.push((pos, Tok::Int(s)));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, d)) = it.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        it.next();
                    } else {
                        break;
                    }
                }
                toks.push((pos, Tok::Ident(s)));
            }
            '\'' => {
                let mut n = 0u32;
                while let Some(&(_, '\'')) = it.peek() {
                    n += 1;
                    it.next();
                }
                toks.push((pos, Tok::Primes(n)));
            }
            '+' => {
                it.next();
                toks.push((pos, Tok::Plus));
            }
            '-' => {
                it.next();
                toks.push((pos, Tok::Minus));
            }
            '*' => {
                it.next();
                toks.push((pos, Tok::Star));
            }
            '/' => {
                it.next();
                toks.push((pos, Tok::Slash));
            }
            '^' => {
                it.next();
                toks.push((pos, Tok::Caret));
            }
            '(' => {
                it.next();
                toks.push((pos, Tok::LParen));
            }
            ')' => {
                it.next();
                toks.push((pos, Tok::RParen));
            }
            '[' => {
                it.next();
                toks.push((pos, Tok::LBracket));
            }
            ']' => {
                it.next();
                toks.push((pos, Tok::RBracket));
            }
            ',' => {
                it.next();
                toks.push((pos, Tok::Comma));
            }
            ';' => {
                it.next();
                toks.push((pos, Tok::Semi));
            }
            _ => return Err(perr(pos, format!("unexpected character '{c}'"))),
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    eof: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.eof, |t| t.0)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn next_tok(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.i).cloned();
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<usize> {
        match self.next_tok() {
            Some((p, ref t)) if t == want => Ok(p),
            Some((p, t)) => Err(perr(p, format!("expected {what}, found {}", tok_name(&t)))),
            None => Err(perr(self.eof, format!("expected {what}"))),
        }
    }

    fn parse_sum(&mut self) -> Result<Ast> {
        let mut lhs = self.parse_signed_term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let p = self.pos();
            self.i += 1;
            let rhs = self.parse_signed_term()?;
            lhs = Ast {
                pos: p,
                kind: AstKind::Bin {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            };
        }
    }

    fn parse_signed_term(&mut self) -> Result<Ast> {
        match self.peek() {
            Some(Tok::Minus) => {
                let p = self.pos();
                self.i += 1;
                let inner = self.parse_signed_term()?;
                Ok(Ast {
                    pos: p,
                    kind: AstKind::Neg(Box::new(inner)),
                })
            }
            Some(Tok::Plus) => {
                self.i += 1;
                self.parse_signed_term()
            }
            _ => self.parse_term(),
        }
    }

    fn parse_term(&mut self) -> Result<Ast> {
        let mut lhs = self.parse_factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            let p = self.pos();
            self.i += 1;
            let rhs = self.parse_factor()?;
            lhs = Ast {
                pos: p,
                kind: AstKind::Bin {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            };
        }
    }

    fn parse_factor(&mut self) -> Result<Ast> {
        let mut base = self.parse_atom()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            let p = self.pos();
            self.i += 1;
            let exp = match self.next_tok() {
                Some((_, Tok::Int(s))) => s
                    .parse::<u32>()
                    .map_err(|_| perr(p, "exponent too large"))?,
                _ => return Err(perr(p, "exponent must be a nonnegative integer literal")),
            };
            base = Ast {
                pos: p,
                kind: AstKind::Pow {
                    base: Box::new(base),
                    exp,
                },
            };
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Ast> {
        let at = self.pos();
        match self.next_tok() {
            Some((p, Tok::Int(s))) => Ok(Ast {
                pos: p,
                kind: AstKind::Number(s),
            }),
            Some((_, Tok::LParen)) => {
                let inner = self.parse_sum()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some((p, Tok::Ident(name))) => self.parse_ident(p, name),
            Some((p, t)) => Err(perr(p, format!("expected a term, found {}", tok_name(&t)))),
            None => Err(perr(at, "expected a term")),
        }
    }

    /// Comma-separated argument list; the opening `(` is already consumed,
    /// the closing `)` is consumed here.
    fn parse_args(&mut self) -> Result<Vec<Ast>> {
        if matches!(self.peek(), Some(Tok::RParen)) {
            return Err(perr(self.pos(), "function call needs at least one argument"));
        }
        let mut args = vec![self.parse_sum()?];
        loop {
            match self.next_tok() {
                Some((_, Tok::Comma)) => args.push(self.parse_sum()?),
                Some((_, Tok::RParen)) => return Ok(args),
                Some((p, t)) => {
                    return Err(perr(p, format!("expected ',' or ')', found {}", tok_name(&t))))
                }
                None => return Err(perr(self.eof, "expected ')'")),
            }
        }
    }

    fn parse_ident(&mut self, p: usize, name: String) -> Result<Ast> {
        // D[name, o1, ...](args): explicit slot-wise derivative orders.
        if name == "D" && matches!(self.peek(), Some(Tok::LBracket)) {
            self.i += 1;
            let fname = match self.next_tok() {
                Some((_, Tok::Ident(f))) if !is_reserved(&f) => f,
                Some((q, t)) => {
                    return Err(perr(q, format!("expected a function name, found {}", tok_name(&t))))
                }
                None => return Err(perr(self.eof, "expected a function name")),
            };
            let mut orders = Vec::new();
            while matches!(self.peek(), Some(Tok::Comma)) {
                self.i += 1;
                match self.next_tok() {
                    Some((q, Tok::Int(s))) => orders.push(
                        s.parse::<u32>()
                            .map_err(|_| perr(q, "derivative order too large"))?,
                    ),
                    Some((q, t)) => {
                        return Err(perr(
                            q,
                            format!("expected a derivative order, found {}", tok_name(&t)),
                        ))
                    }
                    None => return Err(perr(self.eof, "expected a derivative order")),
                }
            }
            self.expect(&Tok::RBracket, "']'")?;
            self.expect(&Tok::LParen, "'(' with the function arguments")?;
            let args = self.parse_args()?;
            if orders.len() != args.len() {
                return Err(perr(
                    p,
                    format!(
                        "{} derivative order(s) for {} argument(s)",
                        orders.len(),
                        args.len()
                    ),
                ));
            }
            return Ok(Ast {
                pos: p,
                kind: AstKind::Call {
                    name: fname,
                    orders,
                    args,
                },
            });
        }

        // F''(x): prime notation for unary functions.
        if let Some(&Tok::Primes(n)) = self.peek() {
            self.i += 1;
            if is_reserved(&name) {
                return Err(perr(p, format!("'{name}' cannot carry derivative primes")));
            }
            self.expect(&Tok::LParen, "'(' after the primed function name")?;
            let args = self.parse_args()?;
            if args.len() != 1 {
                return Err(perr(
                    p,
                    "prime notation needs exactly one argument; use D[name,orders](...) \
                     for several",
                ));
            }
            return Ok(Ast {
                pos: p,
                kind: AstKind::Call {
                    name,
                    orders: vec![n],
                    args,
                },
            });
        }

        if matches!(self.peek(), Some(Tok::LParen)) {
            self.i += 1;
            return match name.as_str() {
                "int" => {
                    let (vp, vname) = match self.next_tok() {
                        Some((q, Tok::Ident(v))) => (q, v),
                        Some((q, t)) => {
                            return Err(perr(
                                q,
                                format!("expected the antiderivative variable, found {}", tok_name(&t)),
                            ))
                        }
                        None => return Err(perr(self.eof, "expected the antiderivative variable")),
                    };
                    if is_reserved(&vname) {
                        return Err(perr(vp, "the antiderivative variable must be a field variable"));
                    }
                    self.expect(&Tok::Semi, "';' after the antiderivative variable")?;
                    let body = self.parse_sum()?;
                    self.expect(&Tok::RParen, "')'")?;
                    Ok(Ast {
                        pos: p,
                        kind: AstKind::AntiDeriv {
                            var: vname,
                            body: Box::new(body),
                        },
                    })
                }
                "exp" | "log" => {
                    let body = self.parse_sum()?;
                    self.expect(&Tok::RParen, "')'")?;
                    let kind = if name == "exp" {
                        AstKind::Exp(Box::new(body))
                    } else {
                        AstKind::Log(Box::new(body))
                    };
                    Ok(Ast { pos: p, kind })
                }
                _ if is_derivation(&name) => {
                    Err(perr(p, format!("'{name}' is a derivation symbol, not a function")))
                }
                _ => {
                    let args = self.parse_args()?;
                    let orders = vec![0; args.len()];
                    Ok(Ast {
                        pos: p,
                        kind: AstKind::Call { name, orders, args },
                    })
                }
            };
        }

        if is_derivation(&name) {
            return Ok(Ast {
                pos: p,
                kind: AstKind::Derivation(name),
            });
        }
        if is_reserved(&name) {
            return Err(perr(p, format!("'{name}' is reserved and must be called")));
        }
        Ok(Ast {
            pos: p,
            kind: AstKind::Variable(name),
        })
    }
}

/// Parses `text` into a raw syntax tree (no context applied).
pub fn parse_ast(text: &str) -> Result<Ast> {
    parse_slice(text, 0)
}

fn parse_slice(text: &str, offset: usize) -> Result<Ast> {
    let toks = lex(text, offset)?;
    let mut p = Parser {
        toks,
        i: 0,
        eof: offset + text.len(),
    };
    let ast = p.parse_sum()?;
    if p.i < p.toks.len() {
        return Err(perr(p.pos(), "unexpected trailing input"));
    }
    Ok(ast)
}

// ---------------------------------------------------------------------------
// Shared lowering helpers
// ---------------------------------------------------------------------------

fn number_to_rat(s: &str, pos: usize) -> Result<Rat> {
    let n = BigInt::from_str(s).map_err(|_| perr(pos, "invalid integer literal"))?;
    Ok(Rat::from_integer(n))
}

fn err_functions(pos: usize, ctx: &str) -> Error {
    perr(pos, format!("function expressions are not valid in {ctx} context"))
}

// ---------------------------------------------------------------------------
// Rational function context
// ---------------------------------------------------------------------------

/// Lowers `text` as a rational function: variables and arithmetic only.
pub fn parse_ratfunc(text: &str) -> Result<RatFunc> {
    lower_ratfunc(&parse_ast(text)?)
}

fn lower_ratfunc(ast: &Ast) -> Result<RatFunc> {
    match &ast.kind {
        AstKind::Number(s) => Ok(RatFunc::from_rat(number_to_rat(s, ast.pos)?)),
        AstKind::Variable(name) => Ok(RatFunc::var(var(name))),
        AstKind::Derivation(_) => Err(perr(ast.pos, "derivation in coefficient position")),
        AstKind::Call { .. } | AstKind::AntiDeriv { .. } | AstKind::Exp(_) | AstKind::Log(_) => {
            Err(err_functions(ast.pos, "rational function"))
        }
        AstKind::Neg(a) => Ok(lower_ratfunc(a)?.neg()),
        AstKind::Bin { op, lhs, rhs } => {
            let a = lower_ratfunc(lhs)?;
            let b = lower_ratfunc(rhs)?;
            match op {
                BinOp::Add => Ok(a.add(&b)),
                BinOp::Sub => Ok(a.sub(&b)),
                BinOp::Mul => Ok(a.mul(&b)),
                BinOp::Div => a.div(&b).map_err(|e| perr(ast.pos, e.to_string())),
            }
        }
        AstKind::Pow { base, exp } => lower_ratfunc(base)?
            .pow(i64::from(*exp))
            .map_err(|e| perr(ast.pos, e.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Univariate operator context
// ---------------------------------------------------------------------------

/// Lowers `text` as a univariate operator in `D = d/d(main)`.
pub fn parse_lodo(text: &str, main: Var) -> Result<OrePoly> {
    lower_lodo(&parse_ast(text)?, main)
}

fn lower_lodo(ast: &Ast, main: Var) -> Result<OrePoly> {
    match &ast.kind {
        AstKind::Number(s) => Ok(OrePoly::constant(
            main,
            RatFunc::from_rat(number_to_rat(s, ast.pos)?),
        )),
        AstKind::Variable(name) => Ok(OrePoly::constant(main, RatFunc::var(var(name)))),
        AstKind::Derivation(d) => {
            if d == "D" {
                Ok(OrePoly::d(main))
            } else {
                Err(perr(
                    ast.pos,
                    format!("'{d}' is a partial derivation; the univariate context uses D"),
                ))
            }
        }
        AstKind::Call { .. } | AstKind::AntiDeriv { .. } | AstKind::Exp(_) | AstKind::Log(_) => {
            Err(err_functions(ast.pos, "operator"))
        }
        AstKind::Neg(a) => Ok(lower_lodo(a, main)?.neg()),
        AstKind::Bin { op, lhs, rhs } => {
            let a = lower_lodo(lhs, main)?;
            let b = lower_lodo(rhs, main)?;
            match op {
                BinOp::Add => Ok(a.add(&b)),
                BinOp::Sub => Ok(a.sub(&b)),
                BinOp::Mul => Ok(a.mul(&b)),
                BinOp::Div => {
                    if b.is_zero() {
                        return Err(perr(ast.pos, "division by zero"));
                    }
                    if b.order() != Some(0) {
                        return Err(perr(ast.pos, "cannot divide by an operator"));
                    }
                    let c = b.coeff(0);
                    if a.order().unwrap_or(0) > 0 && c.as_constant().is_none() {
                        return Err(perr(
                            ast.pos,
                            "cannot divide an operator by a non-constant function; \
                             write the coefficient on the left",
                        ));
                    }
                    let inv = c.recip().map_err(|e| perr(ast.pos, e.to_string()))?;
                    Ok(a.scale(&inv))
                }
            }
        }
        AstKind::Pow { base, exp } => {
            let b = lower_lodo(base, main)?;
            if b.order().unwrap_or(0) == 0 {
                let c = b.coeff(0).pow(i64::from(*exp)).map_err(|e| perr(ast.pos, e.to_string()))?;
                return Ok(OrePoly::constant(main, c));
            }
            if *exp > MAX_OP_POW {
                return Err(perr(ast.pos, "exponent too large for an operator power"));
            }
            let mut acc = OrePoly::one(main);
            for _ in 0..*exp {
                acc = acc.mul(&b);
            }
            Ok(acc)
        }
    }
}

// ---------------------------------------------------------------------------
// Partial operator context
// ---------------------------------------------------------------------------

/// Lowers `text` as a partial differential operator in `Dx`, `Dy`, `Dz`.
pub fn parse_pdop(text: &str) -> Result<PDOp> {
    lower_pdop(&parse_ast(text)?)
}

fn partial_var(name: &str) -> Option<Var> {
    match name {
        "Dx" => Some(var("x")),
        "Dy" => Some(var("y")),
        "Dz" => Some(var("z")),
        _ => None,
    }
}

fn lower_pdop(ast: &Ast) -> Result<PDOp> {
    match &ast.kind {
        AstKind::Number(s) => Ok(PDOp::constant(RatFunc::from_rat(number_to_rat(
            s, ast.pos,
        )?))),
        AstKind::Variable(name) => Ok(PDOp::constant(RatFunc::var(var(name)))),
        AstKind::Derivation(d) => match partial_var(d) {
            Some(v) => Ok(PDOp::dop(v)),
            None => Err(perr(
                ast.pos,
                "bare D is a univariate derivation; use Dx, Dy, or Dz",
            )),
        },
        AstKind::Call { .. } | AstKind::AntiDeriv { .. } | AstKind::Exp(_) | AstKind::Log(_) => {
            Err(err_functions(ast.pos, "operator"))
        }
        AstKind::Neg(a) => Ok(lower_pdop(a)?.neg()),
        AstKind::Bin { op, lhs, rhs } => {
            let a = lower_pdop(lhs)?;
            let b = lower_pdop(rhs)?;
            match op {
                BinOp::Add => Ok(a.add(&b)),
                BinOp::Sub => Ok(a.sub(&b)),
                BinOp::Mul => Ok(a.mul(&b)),
                BinOp::Div => {
                    if b.is_zero() {
                        return Err(perr(ast.pos, "division by zero"));
                    }
                    if b.order() != Some(0) {
                        return Err(perr(ast.pos, "cannot divide by an operator"));
                    }
                    let c = b.coeff(&Mono::one());
                    if a.order().unwrap_or(0) > 0 && c.as_constant().is_none() {
                        return Err(perr(
                            ast.pos,
                            "cannot divide an operator by a non-constant function; \
                             write the coefficient on the left",
                        ));
                    }
                    let inv = c.recip().map_err(|e| perr(ast.pos, e.to_string()))?;
                    Ok(a.scale(&inv))
                }
            }
        }
        AstKind::Pow { base, exp } => {
            let b = lower_pdop(base)?;
            if b.order().unwrap_or(0) == 0 {
                let c = b
                    .coeff(&Mono::one())
                    .pow(i64::from(*exp))
                    .map_err(|e| perr(ast.pos, e.to_string()))?;
                return Ok(PDOp::constant(c));
            }
            if *exp > MAX_OP_POW {
                return Err(perr(ast.pos, "exponent too large for an operator power"));
            }
            let mut acc = PDOp::one();
            for _ in 0..*exp {
                acc = acc.mul(&b);
            }
            Ok(acc)
        }
    }
}

// ---------------------------------------------------------------------------
// Expression context
// ---------------------------------------------------------------------------

/// Lowers `text` as a symbolic solution expression.
pub fn parse_expr(text: &str) -> Result<LinDiffExpr> {
    lower_expr(&parse_ast(text)?)
}

fn lower_expr(ast: &Ast) -> Result<LinDiffExpr> {
    match &ast.kind {
        AstKind::Number(s) => Ok(LinDiffExpr::from_ratfunc(RatFunc::from_rat(
            number_to_rat(s, ast.pos)?,
        ))),
        AstKind::Variable(name) => Ok(LinDiffExpr::from_ratfunc(RatFunc::var(var(name)))),
        AstKind::Derivation(_) => Err(perr(
            ast.pos,
            "derivation symbols are not valid in expression context",
        )),
        AstKind::Call { name, orders, args } => {
            let args: Vec<RatFunc> = args.iter().map(lower_ratfunc).collect::<Result<_>>()?;
            let sym = FuncSym::new(name.clone(), args);
            if orders.iter().all(|&o| o == 0) {
                Ok(LinDiffExpr::func_deriv(FuncDeriv::plain(sym)))
            } else {
                Ok(LinDiffExpr::func_deriv(FuncDeriv {
                    sym,
                    orders: orders.clone(),
                }))
            }
        }
        AstKind::AntiDeriv { var: vname, body } => Ok(LinDiffExpr::antideriv(
            var(vname),
            lower_expr(body)?,
        )),
        AstKind::Exp(body) => Ok(LinDiffExpr::exp_of(lower_expr(body)?)),
        AstKind::Log(body) => Ok(LinDiffExpr::log_of(lower_ratfunc(body)?)),
        AstKind::Neg(a) => Ok(lower_expr(a)?.neg()),
        AstKind::Bin { op, lhs, rhs } => {
            let a = lower_expr(lhs)?;
            let b = lower_expr(rhs)?;
            match op {
                BinOp::Add => Ok(a.add(&b)),
                BinOp::Sub => Ok(a.sub(&b)),
                BinOp::Mul => a.mul(&b).map_err(|e| perr(ast.pos, e.to_string())),
                BinOp::Div => match b.as_ratfunc() {
                    Some(r) => {
                        let inv = r.recip().map_err(|e| perr(ast.pos, e.to_string()))?;
                        Ok(a.scale(&inv))
                    }
                    None => Err(perr(
                        ast.pos,
                        "cannot divide by an expression containing arbitrary functions",
                    )),
                },
            }
        }
        AstKind::Pow { base, exp } => {
            let b = lower_expr(base)?;
            match b.as_ratfunc() {
                Some(r) => Ok(LinDiffExpr::from_ratfunc(
                    r.pow(i64::from(*exp))
                        .map_err(|e| perr(ast.pos, e.to_string()))?,
                )),
                None => match exp {
                    0 => Ok(LinDiffExpr::one()),
                    1 => Ok(b),
                    _ => Err(perr(
                        ast.pos,
                        "cannot raise an expression with function terms to a power",
                    )),
                },
            }
        }
    }
}

// ---------------------------------------------------------------------------
// System context
// ---------------------------------------------------------------------------

/// A partially lowered system-context value: an operator part plus a linear
/// form in the unknowns with operator coefficients.
struct CcValue {
    op: MPoly,
    form: BTreeMap<String, MPoly>,
}

impl CcValue {
    fn constant(op: MPoly) -> CcValue {
        CcValue {
            op,
            form: BTreeMap::new(),
        }
    }

    fn prune(mut self) -> CcValue {
        self.form.retain(|_, p| !p.is_zero());
        self
    }

    fn neg(&self) -> CcValue {
        CcValue {
            op: self.op.neg(),
            form: self.form.iter().map(|(u, p)| (u.clone(), p.neg())).collect(),
        }
    }

    fn add(&self, other: &CcValue) -> CcValue {
        let mut form = self.form.clone();
        for (u, p) in &other.form {
            let entry = form.entry(u.clone()).or_insert_with(MPoly::zero);
            *entry = entry.add(p);
        }
        CcValue {
            op: self.op.add(&other.op),
            form,
        }
        .prune()
    }

    fn sub(&self, other: &CcValue) -> CcValue {
        self.add(&other.neg())
    }
}

fn lower_cc(ast: &Ast, unknowns: &mut Vec<String>) -> Result<CcValue> {
    match &ast.kind {
        AstKind::Number(s) => Ok(CcValue::constant(MPoly::constant(number_to_rat(
            s, ast.pos,
        )?))),
        AstKind::Variable(name) => {
            if !unknowns.iter().any(|u| u == name) {
                unknowns.push(name.clone());
            }
            let mut form = BTreeMap::new();
            form.insert(name.clone(), MPoly::one());
            Ok(CcValue {
                op: MPoly::zero(),
                form,
            })
        }
        AstKind::Derivation(d) => match d.as_str() {
            "Dx" => Ok(CcValue::constant(MPoly::var(var("x")))),
            "Dy" => Ok(CcValue::constant(MPoly::var(var("y")))),
            _ => Err(perr(
                ast.pos,
                format!("'{d}' is not available here; this system context uses Dx and Dy"),
            )),
        },
        AstKind::Call { .. } | AstKind::AntiDeriv { .. } | AstKind::Exp(_) | AstKind::Log(_) => {
            Err(err_functions(ast.pos, "system"))
        }
        AstKind::Neg(a) => Ok(lower_cc(a, unknowns)?.neg()),
        AstKind::Bin { op, lhs, rhs } => {
            let a = lower_cc(lhs, unknowns)?;
            let b = lower_cc(rhs, unknowns)?;
            match op {
                BinOp::Add => Ok(a.add(&b)),
                BinOp::Sub => Ok(a.sub(&b)),
                BinOp::Mul => {
                    if !a.form.is_empty() && !b.form.is_empty() {
                        return Err(perr(ast.pos, "nonlinear product of unknowns"));
                    }
                    let op_part = a.op.mul(&b.op);
                    let form = if b.form.is_empty() {
                        a.form
                            .iter()
                            .map(|(u, p)| (u.clone(), p.mul(&b.op)))
                            .collect()
                    } else {
                        b.form
                            .iter()
                            .map(|(u, p)| (u.clone(), a.op.mul(p)))
                            .collect()
                    };
                    Ok(CcValue { op: op_part, form }.prune())
                }
                BinOp::Div => {
                    if !b.form.is_empty() {
                        return Err(perr(ast.pos, "cannot divide by an unknown"));
                    }
                    let c = RatFunc::from_poly(b.op.clone());
                    match c.as_constant() {
                        Some(c) if !c.is_zero() => {
                            let inv = MPoly::constant(Rat::new(
                                c.denom().clone(),
                                c.numer().clone(),
                            ));
                            Ok(CcValue {
                                op: a.op.mul(&inv),
                                form: a
                                    .form
                                    .iter()
                                    .map(|(u, p)| (u.clone(), p.mul(&inv)))
                                    .collect(),
                            })
                        }
                        Some(_) => Err(perr(ast.pos, "division by zero")),
                        None => Err(perr(ast.pos, "cannot divide by an operator")),
                    }
                }
            }
        }
        AstKind::Pow { base, exp } => {
            let b = lower_cc(base, unknowns)?;
            if b.form.is_empty() {
                return Ok(CcValue::constant(b.op.pow(*exp)));
            }
            match exp {
                0 => Ok(CcValue::constant(MPoly::one())),
                1 => Ok(b),
                _ => Err(perr(ast.pos, "nonlinear power of an unknown")),
            }
        }
    }
}

/// Parses a constant-coefficient system: one equation per line, `=` between
/// sides, operator coefficients in `Dx`/`Dy` applied to unknowns from the
/// left.  Unknowns are discovered in reading order.
pub fn parse_system(text: &str) -> Result<CcSystem> {
    let mut unknowns: Vec<String> = Vec::new();
    let mut rows: Vec<BTreeMap<String, MPoly>> = Vec::new();
    let mut offset = 0usize;
    for line in text.split('\n') {
        let line_start = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (k, lhs, rhs) = split_equation(line, line_start)?;
        let lhs = parse_slice(lhs, line_start)?;
        let rhs = parse_slice(rhs, line_start + k + 1)?;
        let l = lower_cc(&lhs, &mut unknowns)?;
        let r = lower_cc(&rhs, &mut unknowns)?;
        let v = l.sub(&r);
        if !v.op.is_zero() {
            return Err(perr(
                line_start,
                "equation has an operator term independent of the unknowns",
            ));
        }
        rows.push(v.form);
    }
    if rows.is_empty() {
        return Err(perr(text.len(), "the system contains no equations"));
    }
    if unknowns.is_empty() {
        return Err(perr(text.len(), "the system mentions no unknowns"));
    }
    let full_rows: Vec<Vec<CcOperator>> = rows
        .into_iter()
        .map(|m| {
            unknowns
                .iter()
                .map(|u| CcOperator::from_poly(m.get(u).cloned().unwrap_or_else(MPoly::zero)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    CcSystem::new(unknowns, full_rows)
}

/// Splits a line on its single `=`; errors otherwise.
fn split_equation(line: &str, line_start: usize) -> Result<(usize, &str, &str)> {
    let eq_positions: Vec<usize> = line
        .char_indices()
        .filter(|&(_, c)| c == '=')
        .map(|(i, _)| i)
        .collect();
    match eq_positions.as_slice() {
        [k] => Ok((*k, &line[..*k], &line[*k + 1..])),
        [] => Err(perr(
            line_start + line.len(),
            "each equation needs exactly one '='",
        )),
        [_, second, ..] => Err(perr(
            line_start + second,
            "each equation needs exactly one '='",
        )),
    }
}

/// Lexes a bare non-reserved identifier (a name on the left of `=`).
fn single_name(text: &str, offset: usize) -> Result<(usize, String)> {
    let toks = lex(text, offset)?;
    match toks.as_slice() {
        [(p, Tok::Ident(name))] if !is_reserved(name) => Ok((*p, name.clone())),
        [(p, t)] => Err(perr(*p, format!("expected a name, found {}", tok_name(t)))),
        [] => Err(perr(offset + text.len(), "expected a name")),
        [_, (p, t), ..] => Err(perr(
            *p,
            format!("expected '=', found {}", tok_name(t)),
        )),
    }
}

/// Parses named expressions, one `name = expr` per line, such as a solution
/// map for a system's unknowns.  Names must be distinct.
pub fn parse_assignments(text: &str) -> Result<Vec<(String, LinDiffExpr)>> {
    let mut out: Vec<(String, LinDiffExpr)> = Vec::new();
    let mut offset = 0usize;
    for line in text.split('\n') {
        let line_start = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (k, lhs, rhs) = split_equation(line, line_start)?;
        let (np, name) = single_name(lhs, line_start)?;
        if out.iter().any(|(n, _)| *n == name) {
            return Err(perr(np, format!("'{name}' is assigned twice")));
        }
        let e = lower_expr(&parse_slice(rhs, line_start + k + 1)?)?;
        out.push((name, e));
    }
    if out.is_empty() {
        return Err(perr(text.len(), "no assignments given"));
    }
    Ok(out)
}

/// Parses a substitution `new = Σ T·old`, one definition per line, against
/// the fixed `unknowns` of a system.  Returns the new names in reading order
/// and the coefficient matrix rows aligned with `unknowns`.
pub fn parse_substitution(
    text: &str,
    unknowns: &[String],
) -> Result<(Vec<String>, Vec<Vec<CcOperator>>)> {
    let mut names: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<CcOperator>> = Vec::new();
    let mut offset = 0usize;
    for line in text.split('\n') {
        let line_start = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (k, lhs, rhs) = split_equation(line, line_start)?;
        let (np, name) = single_name(lhs, line_start)?;
        if unknowns.iter().any(|u| *u == name) {
            return Err(perr(
                np,
                format!("'{name}' is already an unknown of the system"),
            ));
        }
        if names.contains(&name) {
            return Err(perr(np, format!("'{name}' is defined twice")));
        }
        let mut seen = unknowns.to_vec();
        let v = lower_cc(&parse_slice(rhs, line_start + k + 1)?, &mut seen)?;
        if seen.len() > unknowns.len() {
            return Err(perr(
                line_start + k + 1,
                format!("'{}' is not an unknown of the system", seen[unknowns.len()]),
            ));
        }
        if !v.op.is_zero() {
            return Err(perr(
                line_start,
                "definition has an operator term independent of the unknowns",
            ));
        }
        let row = unknowns
            .iter()
            .map(|u| CcOperator::from_poly(v.form.get(u).cloned().unwrap_or_else(MPoly::zero)))
            .collect::<Result<Vec<_>>>()?;
        names.push(name);
        rows.push(row);
    }
    if names.is_empty() {
        return Err(perr(text.len(), "no definitions given"));
    }
    Ok((names, rows))
}

// ---------------------------------------------------------------------------
// Elimination order strings
// ---------------------------------------------------------------------------

fn split_chain(s: &str, base: usize) -> Vec<(usize, &str)> {
    fn push<'a>(out: &mut Vec<(usize, &'a str)>, piece: &'a str, base: usize, at: usize) {
        let trimmed = piece.trim_start();
        let lead = piece.len() - trimmed.len();
        out.push((base + at + lead, trimmed.trim_end()));
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        if c == '>' {
            push(&mut out, &s[start..i], base, start);
            start = i + 1;
        }
    }
    push(&mut out, &s[start..], base, start);
    out
}

/// Parses an elimination order such as `"u3>u2>u1;Dx>Dy"` against the
/// system's unknowns.  The unknown chain lists every unknown exactly once,
/// highest rank first; the optional derivation chain defaults to `Dx>Dy`.
pub fn parse_order(text: &str, unknowns: &[String]) -> Result<ModuleOrder> {
    let (upart, vpart) = match text.find(';') {
        Some(k) => (&text[..k], Some((k + 1, &text[k + 1..]))),
        None => (text, None),
    };
    let mut ranking: Vec<usize> = Vec::new();
    for (at, name) in split_chain(upart, 0) {
        if name.is_empty() {
            return Err(perr(at, "expected an unknown name"));
        }
        let idx = unknowns
            .iter()
            .position(|u| u == name)
            .ok_or_else(|| perr(at, format!("unknown '{name}' is not part of the system")))?;
        if ranking.contains(&idx) {
            return Err(perr(at, format!("unknown '{name}' is ranked twice")));
        }
        ranking.push(idx);
    }
    if ranking.len() != unknowns.len() {
        return Err(perr(
            text.len(),
            format!(
                "the order ranks {} of {} unknowns; every unknown must appear",
                ranking.len(),
                unknowns.len()
            ),
        ));
    }
    let vars = match vpart {
        None => vec![var("x"), var("y")],
        Some((off, s)) => {
            let mut vs = Vec::new();
            for (at, name) in split_chain(s, off) {
                match name {
                    "Dx" => vs.push(var("x")),
                    "Dy" => vs.push(var("y")),
                    _ => return Err(perr(at, format!("expected Dx or Dy, found '{name}'"))),
                }
            }
            vs
        }
    };
    ModuleOrder::new(ranking, vars)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

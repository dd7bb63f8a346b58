//! Function expressions: parsing, printing, symbolic differentiation and
//! counted evaluation.
//!
//! Grammar (standard precedence, `^` binds tighter than unary minus):
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' exponent)*            right associative
//! exponent := NUMBER | '(' ['-'|'+'] NUMBER ['/' NUMBER] ')'
//! atom     := NUMBER | 'x' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'
//! FUNC     := exp | log | sin | cos
//! ```
//!
//! Exponents are rational constants, so every expression has a closed-form
//! derivative. A negative exponent must be parenthesized: `x^(-1)`.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rug::{Integer, Rational};
use thiserror::Error;

use crate::scalar::{parse_decimal_rational, principal_root, real_root, DomainMode, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Non-negative terminating-decimal literal.
    Num(Rational),
    Var,
    Const(Constant),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Rational),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" | "))]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error in `{location}`: {reason}")]
pub struct DomainError {
    pub location: String,
    pub reason: String,
}

impl Expr {
    /// Literal node for an arbitrary rational; negative values become `Neg`
    /// and non-decimal fractions become `Div`, so every `Num` prints exactly.
    pub fn num(r: Rational) -> Expr {
        if r < 0 {
            return Expr::Neg(Box::new(Expr::num(-r)));
        }
        if is_terminating(&r) {
            return Expr::Num(r);
        }
        let (n, d) = r.into_numer_denom();
        Expr::Div(Box::new(Expr::Num(n.into())), Box::new(Expr::Num(d.into())))
    }

    pub fn int(n: i64) -> Expr {
        Expr::num(Rational::from(n))
    }

    fn is_num(&self, v: i64) -> bool {
        matches!(self, Expr::Num(r) if *r == v)
    }

    /// Replaces the variable by `inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Const(_) => self.clone(),
            Var => inner.clone(),
            Neg(a) => Neg(Box::new(a.substitute(inner))),
            Add(a, b) => Add(Box::new(a.substitute(inner)), Box::new(b.substitute(inner))),
            Sub(a, b) => Sub(Box::new(a.substitute(inner)), Box::new(b.substitute(inner))),
            Mul(a, b) => Mul(Box::new(a.substitute(inner)), Box::new(b.substitute(inner))),
            Div(a, b) => Div(Box::new(a.substitute(inner)), Box::new(b.substitute(inner))),
            Pow(a, r) => Pow(Box::new(a.substitute(inner)), r.clone()),
            Call(f, a) => Call(*f, Box::new(a.substitute(inner))),
        }
    }

    pub fn derivative(&self) -> Expr {
        differentiate(self)
    }

    pub fn eval(&self, x: &Scalar) -> Result<Scalar, DomainError> {
        evaluate(self, x)
    }
}

fn is_terminating(r: &Rational) -> bool {
    let mut d = r.denom().clone();
    for p in [2u32, 5] {
        while d.is_divisible_u(p) {
            d /= p;
        }
    }
    d == 1
}

fn decimal_string(r: &Rational) -> String {
    // r is a non-negative terminating decimal
    let mut scale = 0u32;
    let mut v = r.clone();
    while *v.denom() != 1 {
        v *= 10;
        scale += 1;
    }
    let digits = v.numer().to_string();
    if scale == 0 {
        return digits;
    }
    let scale = scale as usize;
    let padded = if digits.len() <= scale {
        format!("{}{}", "0".repeat(scale + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int, frac) = padded.split_at(padded.len() - scale);
    format!("{int}.{frac}")
}

fn exponent_string(r: &Rational) -> String {
    if *r.denom() == 1 && *r >= 0 {
        return r.numer().to_string();
    }
    if *r.denom() == 1 {
        return format!("({})", r.numer());
    }
    format!("({}/{})", r.numer(), r.denom())
}

// ---------------------------------------------------------------------------
// printing

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
        Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
        Expr::Neg(_) => PREC_NEG,
        Expr::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(r) => write!(f, "{}", decimal_string(r)),
            Expr::Var => write!(f, "x"),
            Expr::Const(Constant::Pi) => write!(f, "pi"),
            Expr::Const(Constant::E) => write!(f, "e"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_wrapped(f, a, precedence(a) < PREC_NEG)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let (level, op) = match self {
                    Expr::Add(..) => (PREC_ADD, "+"),
                    Expr::Sub(..) => (PREC_ADD, "-"),
                    Expr::Mul(..) => (PREC_MUL, "*"),
                    _ => (PREC_MUL, "/"),
                };
                write_wrapped(f, a, precedence(a) < level)?;
                write!(f, "{op}")?;
                // right operand: unary minus may appear directly after an operator
                let rp = precedence(b);
                write_wrapped(f, b, rp <= level && rp != PREC_NEG)
            }
            Expr::Pow(a, r) => {
                write_wrapped(f, a, precedence(a) < PREC_ATOM)?;
                write!(f, "^{}", exponent_string(r))
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(r) => format!("number {}", decimal_string(r)),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent only when followed by a digit (so `2e` is not a number)
                if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let r = parse_decimal_rational(lit).ok_or_else(|| SyntaxError {
                    offset: start,
                    expected: vec!["number".into()],
                    found: format!("`{lit}`"),
                })?;
                out.push((start, Tok::Num(r)));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(SyntaxError {
                    offset: start,
                    expected: vec!["expression".into()],
                    found: format!("`{}`", &text[start..].chars().next().unwrap()),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.atom()?;
        let mut exps = Vec::new();
        while *self.peek() == Tok::Caret {
            self.bump();
            exps.push((self.offset(), self.exponent()?));
        }
        let Some((_, mut folded)) = exps.pop() else {
            return Ok(base);
        };
        // a^b^c = a^(b^c): fold the constant tower from the right
        while let Some((offset, b)) = exps.pop() {
            if *folded.denom() != 1 || folded.numer().to_i32().is_none() {
                return Err(SyntaxError {
                    offset,
                    expected: vec!["integer exponent in a power tower".into()],
                    found: exponent_string(&folded),
                });
            }
            folded = rational_powi(&b, folded.numer().to_i32().unwrap());
        }
        Ok(Expr::Pow(Box::new(base), folded))
    }

    fn exponent(&mut self) -> Result<Rational, SyntaxError> {
        match self.bump() {
            Tok::Num(r) => Ok(r),
            Tok::LParen => {
                let neg = match self.peek() {
                    Tok::Minus => {
                        self.bump();
                        true
                    }
                    Tok::Plus => {
                        self.bump();
                        false
                    }
                    _ => false,
                };
                let Tok::Num(mut r) = self.peek().clone() else {
                    return Err(self.error(&["rational exponent literal"]));
                };
                self.bump();
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let Tok::Num(d) = self.peek().clone() else {
                        return Err(self.error(&["exponent denominator"]));
                    };
                    if d == 0 {
                        return Err(self.error(&["nonzero exponent denominator"]));
                    }
                    self.bump();
                    r /= d;
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(if neg { -r } else { r })
            }
            _ => {
                self.pos -= 1;
                Err(self.error(&["number", "`(` (negative or fractional exponents are parenthesized)"]))
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Num(r) => {
                self.bump();
                Ok(Expr::Num(r))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "x" => {
                        self.bump();
                        return Ok(Expr::Var);
                    }
                    "pi" => {
                        self.bump();
                        return Ok(Expr::Const(Constant::Pi));
                    }
                    "e" => {
                        self.bump();
                        return Ok(Expr::Const(Constant::E));
                    }
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    _ => return Err(self.error(&["x", "pi", "e", "exp", "log", "sin", "cos"])),
                };
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Err(self.error(&["`(` after function name"]));
                }
                self.bump();
                let arg = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.error(&["number", "x", "pi", "e", "function", "`(`", "`-`"])),
        }
    }
}

fn rational_powi(b: &Rational, k: i32) -> Rational {
    use rug::ops::Pow;
    let p = Rational::from(b.pow(k.unsigned_abs()));
    if k < 0 {
        p.recip()
    } else {
        p
    }
}

pub fn parse(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// differentiation

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_num(0) {
        b
    } else if b.is_num(0) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_num(0) {
        a
    } else if a.is_num(0) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_num(0) || b.is_num(0) {
        Expr::int(0)
    } else if a.is_num(1) {
        b
    } else if b.is_num(1) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_num(0) {
        Expr::int(0)
    } else if b.is_num(1) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn neg(a: Expr) -> Expr {
    if a.is_num(0) {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn pow(a: Expr, r: Rational) -> Expr {
    if r == 0 {
        Expr::int(1)
    } else if r == 1 {
        a
    } else {
        Expr::Pow(Box::new(a), r)
    }
}

/// Symbolic derivative with respect to `x`; only 0/1 identities are folded.
pub fn differentiate(e: &Expr) -> Expr {
    use Expr::*;
    match e {
        Num(_) | Const(_) => Expr::int(0),
        Var => Expr::int(1),
        Neg(a) => neg(differentiate(a)),
        Add(a, b) => add(differentiate(a), differentiate(b)),
        Sub(a, b) => sub(differentiate(a), differentiate(b)),
        Mul(a, b) => add(
            mul(differentiate(a), (**b).clone()),
            mul((**a).clone(), differentiate(b)),
        ),
        Div(a, b) => div(
            sub(
                mul(differentiate(a), (**b).clone()),
                mul((**a).clone(), differentiate(b)),
            ),
            pow((**b).clone(), Rational::from(2)),
        ),
        Pow(a, r) => {
            if *r == 0 {
                return Expr::int(0);
            }
            let outer = mul(Expr::num(r.clone()), pow((**a).clone(), Rational::from(r - 1u32)));
            mul(outer, differentiate(a))
        }
        Call(f, a) => {
            let inner = differentiate(a);
            let a = (**a).clone();
            match f {
                Func::Exp => mul(Call(Func::Exp, Box::new(a)), inner),
                Func::Log => div(inner, a),
                Func::Sin => mul(Call(Func::Cos, Box::new(a)), inner),
                Func::Cos => neg(mul(Call(Func::Sin, Box::new(a)), inner)),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// evaluation

fn domain(e: &Expr, reason: impl Into<String>) -> DomainError {
    DomainError { location: e.to_string(), reason: reason.into() }
}

/// Evaluates `e` at `x`. Complex `x` selects principal-branch semantics;
/// real `x` rejects logs of non-positive numbers and even roots of negatives.
pub fn evaluate(e: &Expr, x: &Scalar) -> Result<Scalar, DomainError> {
    let prec = x.prec();
    let mode = if x.is_complex() { DomainMode::ComplexPrincipal } else { DomainMode::RealSignPreserving };
    Ok(match e {
        Expr::Num(r) => Scalar::from_rational(r, prec),
        Expr::Var => x.clone(),
        Expr::Const(Constant::Pi) => Scalar::pi(prec),
        Expr::Const(Constant::E) => Scalar::euler(prec),
        Expr::Neg(a) => -evaluate(a, x)?,
        Expr::Add(a, b) => evaluate(a, x)? + evaluate(b, x)?,
        Expr::Sub(a, b) => evaluate(a, x)? - evaluate(b, x)?,
        Expr::Mul(a, b) => evaluate(a, x)? * evaluate(b, x)?,
        Expr::Div(a, b) => {
            let den = evaluate(b, x)?;
            if den.is_zero() {
                return Err(domain(e, "division by zero"));
            }
            evaluate(a, x)? / den
        }
        Expr::Pow(a, r) => {
            let base = evaluate(a, x)?;
            if base.is_zero() {
                if *r < 0 {
                    return Err(domain(e, "zero raised to a negative power"));
                }
                if *r == 0 {
                    return Ok(Scalar::one(prec));
                }
                return Ok(base);
            }
            let p = r.numer().to_i64().ok_or_else(|| domain(e, "exponent too large"))?;
            let q = r.denom().to_u32().ok_or_else(|| domain(e, "exponent too large"))?;
            if q == 1 {
                base.powi(p)
            } else {
                let root = match mode {
                    DomainMode::ComplexPrincipal => principal_root(&base, q),
                    DomainMode::RealSignPreserving => real_root(&base, q, mode),
                }
                .map_err(|err| domain(e, err.to_string()))?;
                root.powi(p)
            }
        }
        Expr::Call(f, a) => {
            let v = evaluate(a, x)?;
            match f {
                Func::Exp => v.exp(),
                Func::Log => v.ln().map_err(|err| domain(e, err.to_string()))?,
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            }
        }
    })
}

/// An evaluation oracle: an expression plus a monotone call counter.
#[derive(Debug)]
pub struct Oracle {
    expr: Expr,
    calls: AtomicU64,
}

impl Clone for Oracle {
    fn clone(&self) -> Self {
        Oracle::new(self.expr.clone())
    }
}

impl Oracle {
    pub fn new(expr: Expr) -> Self {
        Oracle { expr, calls: AtomicU64::new(0) }
    }

    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        parse(text).map(Oracle::new)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, x: &Scalar) -> Result<Scalar, DomainError> {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        evaluate(&self.expr, x)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(AtomicOrdering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, AtomicOrdering::Relaxed);
    }
}

/// Convenience for integer literals in tests and corpus builders.
pub fn integer(n: i64) -> Expr {
    Expr::num(Rational::from(Integer::from(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Float;

    fn p(s: &str) -> Expr {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn parses_product_of_power_and_exp() {
        let two = Expr::int(2);
        let expected = Expr::Mul(
            b(Expr::Pow(b(Expr::Sub(b(Expr::Var), b(two))), Rational::from(3))),
            b(Expr::Call(Func::Exp, b(Expr::Var))),
        );
        assert_eq!(p("(x-2)^3 * exp(x)"), expected);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("-x^2"), Expr::Neg(b(Expr::Pow(b(Expr::Var), Rational::from(2)))));
        assert_eq!(p("1-x-2"), Expr::Sub(b(Expr::Sub(b(Expr::int(1)), b(Expr::Var))), b(Expr::int(2))));
        assert_eq!(p("x^2^3"), Expr::Pow(b(Expr::Var), Rational::from(8)));
        assert_eq!(p("x^(1/3)"), Expr::Pow(b(Expr::Var), Rational::from((1, 3))));
        assert_eq!(p("x^(-1)"), Expr::Pow(b(Expr::Var), Rational::from(-1)));
        assert_eq!(p("2*-x"), Expr::Mul(b(Expr::int(2)), b(Expr::Neg(b(Expr::Var)))));
        assert_eq!(p("1.5e2"), Expr::int(150));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse("x^-1").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.iter().any(|s| s.contains('(')));

        let err = parse("sin x").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.expected[0].contains('('));

        assert_eq!(parse("x+").unwrap_err().offset, 2);
        assert_eq!(parse("(x").unwrap_err().found, "end of input");
        assert!(parse("foo(x)").is_err());
        assert!(parse("2e").is_err());
        assert!(parse("x $ 2").is_err());
    }

    #[test]
    fn derivative_rules() {
        assert_eq!(differentiate(&p("(x-2)^3")), p("3*(x-2)^2"));
        assert_eq!(differentiate(&p("exp(x)*x")), p("exp(x)*x+exp(x)"));
        assert_eq!(differentiate(&p("log(x)")), p("1/x"));
        assert_eq!(differentiate(&p("cos(2*x)")), p("-(sin(2*x)*2)"));
        assert_eq!(differentiate(&p("x^(1/2)")), p("0.5*x^(-1/2)"));
    }

    #[test]
    fn evaluation() {
        let prec = 128;
        let three = Scalar::from_int(3, prec);
        assert_eq!(p("(x-2)^3").eval(&three).unwrap(), Scalar::from_int(1, prec));
        let two = Scalar::from_int(2, prec);
        assert!(p("(x-2)^3*exp(x)").eval(&two).unwrap().is_zero());
        let err = p("1/x").eval(&Scalar::zero(prec)).unwrap_err();
        assert_eq!(err.location, "1/x");
        assert!(p("log(x)").eval(&Scalar::from_int(-1, prec)).is_err());
        assert!(p("log(x)").eval(&Scalar::from_int(-1, prec).into_complex()).is_ok());
        assert!(p("x^(1/2)").eval(&Scalar::from_int(-4, prec)).is_err());
        assert_eq!(p("x^(1/3)").eval(&Scalar::from_int(-8, prec)).unwrap(), Scalar::from_int(-2, prec));
    }

    #[test]
    fn oracle_counts_every_call() {
        let o = Oracle::parse("x^2-4").unwrap();
        let x = Scalar::from_int(3, 64);
        for _ in 0..5 {
            o.eval(&x).unwrap();
        }
        assert!(o.eval(&Scalar::from_int(1, 64)).is_ok());
        assert_eq!(o.calls(), 6);
        o.reset();
        assert_eq!(o.calls(), 0);
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        assert_eq!(p("(x-2)^3*exp(x)").to_string(), "(x-2)^3*exp(x)");
        assert_eq!(p("x-(1-x)").to_string(), "x-(1-x)");
        assert_eq!(p("-(x+1)").to_string(), "-(x+1)");
        assert_eq!(p("0.125*x^(-3/2)").to_string(), "0.125*x^(-3/2)");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                Just(Expr::Var),
                (0u32..40).prop_map(|n| Expr::Num(Rational::from((n, 4)))),
                Just(Expr::Const(Constant::Pi)),
            ];
            leaf.prop_recursive(4, 24, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                    (inner.clone(), -3i32..4, 1u32..4)
                        .prop_map(|(a, n, d)| Expr::Pow(Box::new(a), Rational::from((n, d)))),
                    inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                    inner.prop_map(|a| Expr::Call(Func::Exp, Box::new(a))),
                ]
            })
        }

        /// Smooth expressions for the finite-difference check.
        fn arb_smooth() -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                Just(Expr::Var),
                (1u32..9).prop_map(|n| Expr::Num(Rational::from((n, 2)))),
            ];
            leaf.prop_recursive(3, 16, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                    (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                    (inner.clone(), 0i32..4).prop_map(|(a, n)| Expr::Pow(Box::new(a), Rational::from(n))),
                    inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
                    inner.clone().prop_map(|a| Expr::Call(Func::Cos, Box::new(a))),
                    inner.prop_map(|a| Expr::Call(Func::Exp, Box::new(Expr::Call(Func::Sin, Box::new(a))))),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_parse_roundtrip(e in arb_expr()) {
                let printed = e.to_string();
                let reparsed = parse(&printed).unwrap();
                prop_assert_eq!(reparsed, e, "{}", printed);
            }

            #[test]
            fn derivative_matches_central_difference(e in arb_smooth(), x in -1.5f64..1.5) {
                let prec = 300u32;
                let h = Scalar::real(Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 3)));
                let x = Scalar::from_f64(x, prec);
                let d = differentiate(&e).eval(&x).unwrap();
                let fd = (e.eval(&(&x + &h)).unwrap() - e.eval(&(&x - &h)).unwrap())
                    / (Scalar::from_int(2, prec) * &h);
                let err = (&d - &fd).abs();
                let scale = d.abs().max(&Float::with_val(prec, 1));
                // O(h^2) truncation with a generous constant
                let bound = Float::with_val(prec, Float::i_exp(1, -2 * (prec as i32) / 3 + 40)) * scale;
                prop_assert!(err <= bound, "{} at {}: {} vs {}", e, x, d, fd);
            }
        }
    }
}

//! Weight functions with exact Taylor metadata at their expansion point.
//!
//! Every weight can be evaluated at a [`Scalar`] and, for the built-in
//! kinds, also reports its Taylor coefficients as exact rationals. Those
//! coefficients drive both the condition checks below and the series oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprs::{self, Expr};
use crate::family::{Family, MethodParams};
use crate::scalar::{self, DomainMode, Scalar};
use crate::series::qseries::{eval_poly, QSeries};

/// Degree to which exact Taylor data is produced; enough for ε⁸ expansions.
pub const TAYLOR_DEGREE: usize = 8;

/// Precision used to differentiate expression-defined weights.
const CUSTOM_PRECISION: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeightName {
    P,
    Q,
    H,
    G,
    L,
    W,
    S,
    R,
    Phi,
}

impl WeightName {
    pub const ALL: [WeightName; 9] = [
        WeightName::P,
        WeightName::Q,
        WeightName::H,
        WeightName::G,
        WeightName::L,
        WeightName::W,
        WeightName::S,
        WeightName::R,
        WeightName::Phi,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            WeightName::P => "P",
            WeightName::Q => "Q",
            WeightName::H => "H",
            WeightName::G => "G",
            WeightName::L => "L",
            WeightName::W => "W",
            WeightName::S => "S",
            WeightName::R => "R",
            WeightName::Phi => "Phi",
        }
    }

    pub fn is_bivariate(self) -> bool {
        matches!(self, WeightName::Q | WeightName::R)
    }
}

impl fmt::Display for WeightName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for WeightName {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WeightName::ALL
            .into_iter()
            .find(|w| w.symbol().eq_ignore_ascii_case(s))
            .ok_or_else(|| WeightError::UnknownSlot(s.to_string()))
    }
}

/// A derivative value of a weight at its expansion point: `P2 = P''(0)`,
/// `Quv = ∂²Q/∂u∂v (0,0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Deriv(WeightName, usize),
    Partial(WeightName, usize, usize),
}

impl Slot {
    pub fn weight(self) -> WeightName {
        match self {
            Slot::Deriv(w, _) | Slot::Partial(w, _, _) => w,
        }
    }

    /// Factor converting the derivative value into a Taylor coefficient.
    pub fn factorial(self) -> Integer {
        match self {
            Slot::Deriv(_, k) => Integer::factorial(k as u32).into(),
            Slot::Partial(_, i, j) => {
                Integer::from(Integer::factorial(i as u32)) * Integer::from(Integer::factorial(j as u32))
            }
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Slot::Deriv(w, k) => write!(f, "{w}{k}"),
            Slot::Partial(w, 0, 0) => write!(f, "{w}00"),
            Slot::Partial(w, 1, 0) => write!(f, "{w}u0"),
            Slot::Partial(w, 0, 1) => write!(f, "{w}0v"),
            Slot::Partial(w, i, j) => write!(f, "{w}{}{}", "u".repeat(i), "v".repeat(j)),
        }
    }
}

impl FromStr for Slot {
    type Err = WeightError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WeightError::UnknownSlot(s.to_string());
        let split = if s.len() >= 3 && s[..3].eq_ignore_ascii_case("phi") { 3 } else { 1 };
        if s.len() <= split {
            return Err(bad());
        }
        let name: WeightName = s[..split].parse().map_err(|_| bad())?;
        let rest = &s[split..];
        if rest.bytes().all(|b| b.is_ascii_digit()) && !name.is_bivariate() {
            return rest.parse().map(|k| Slot::Deriv(name, k)).map_err(|_| bad());
        }
        if !name.is_bivariate() {
            return Err(bad());
        }
        let (i, j) = match rest {
            "00" => (0, 0),
            "u0" => (1, 0),
            "0v" => (0, 1),
            _ => {
                let i = rest.bytes().take_while(|&b| b == b'u').count();
                let j = rest.len() - i;
                if i + j == 0 || !rest[i..].bytes().all(|b| b == b'v') {
                    return Err(bad());
                }
                (i, j)
            }
        };
        Ok(Slot::Partial(name, i, j))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("unknown weight `{0}`")]
    UnknownWeight(String),
    #[error("weight `{weight}` needs parameter `{param}`")]
    MissingParam { weight: String, param: String },
    #[error("weight `{weight}`: {reason}")]
    BadParam { weight: String, reason: String },
    #[error("unknown weight slot `{0}`")]
    UnknownSlot(String),
    #[error("weight slot {0} is not declared by the bound weight")]
    UnspecifiedSlot(Slot),
    #[error("weight `{weight}` evaluated within the pole guard of a pole at {at}")]
    PoleHit { weight: String, at: String },
    #[error("weight `{weight}`: {reason}")]
    Domain { weight: String, reason: String },
}

/// A declared derivative: exact for built-in kinds, approximate for
/// expression-defined weights.
#[derive(Clone, Debug, PartialEq)]
pub enum DerivValue {
    Exact(Rational),
    Approx(Float),
}

impl DerivValue {
    pub fn to_rational(&self) -> Rational {
        match self {
            DerivValue::Exact(r) => r.clone(),
            DerivValue::Approx(f) => f.to_rational().unwrap_or_default(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, DerivValue::Exact(_))
    }
}

impl fmt::Display for DerivValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivValue::Exact(r) => write!(f, "{r}"),
            DerivValue::Approx(x) => write!(f, "~{}", x.to_string_radix(10, Some(24))),
        }
    }
}

pub type ParamMap = BTreeMap<String, Rational>;

fn param(params: &ParamMap, weight: &str, key: &str) -> Result<Rational, WeightError> {
    params
        .get(key)
        .cloned()
        .ok_or_else(|| WeightError::MissingParam { weight: weight.into(), param: key.into() })
}

fn fmt_q(r: &Rational) -> String {
    r.to_string()
}

#[derive(Clone, Debug)]
enum Kind1 {
    King { beta: Rational },
    Binomial { r: Rational },
    RationalGamma { gamma: Rational },
    RationalA { a: Rational },
    RationalC { c: Rational },
    TruncatedP { beta: Rational },
    LinearB { b1: Rational, b2: Rational },
    WLee { c: Rational, r: Rational },
    Taylor { center: Rational, coeffs: Vec<Rational> },
    Scaled { inner: Box<Weight1>, k: Rational },
    TimesIdentity(Box<Weight1>),
    Custom { expr: Expr, center: Rational, derivs: Vec<Float> },
}

/// A univariate weight `w(s)` expanded about `center` (zero except for φ).
#[derive(Clone, Debug)]
pub struct Weight1 {
    kind: Kind1,
    label: String,
}

fn pole_tolerance(prec: u32) -> Float {
    Float::with_val(prec.max(16), Float::i_exp(1, -((prec / 4) as i32)))
}

fn guard(den: &Scalar, label: &str, pole: &str) -> Result<(), WeightError> {
    if den.is_zero() || den.abs() <= pole_tolerance(den.prec()) {
        return Err(WeightError::PoleHit { weight: label.into(), at: pole.into() });
    }
    Ok(())
}

fn q(r: &Rational, prec: u32) -> Scalar {
    Scalar::from_rational(r, prec)
}

fn horner(coeffs: &[Rational], s: &Scalar) -> Scalar {
    let prec = s.prec();
    let mut acc = Scalar::zero(prec);
    for c in coeffs.iter().rev() {
        acc = acc * s + q(c, prec);
    }
    acc
}

/// `x^r` for rational `r`, via a root followed by an integer power.
fn pow_rational(x: &Scalar, r: &Rational, label: &str) -> Result<Scalar, WeightError> {
    let den = r.denom().to_u32().ok_or_else(|| WeightError::BadParam {
        weight: label.into(),
        reason: "exponent denominator too large".into(),
    })?;
    let num = r.numer().to_i64().ok_or_else(|| WeightError::BadParam {
        weight: label.into(),
        reason: "exponent numerator too large".into(),
    })?;
    let mode = if x.is_complex() { DomainMode::ComplexPrincipal } else { DomainMode::RealSignPreserving };
    let root = scalar::real_root(x, den, mode)
        .map_err(|e| WeightError::Domain { weight: label.into(), reason: e.to_string() })?;
    if num < 0 {
        guard(&root, label, "zero base")?;
    }
    Ok(root.powi(num))
}

impl Weight1 {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Polynomial `Σ coeffs[k] (s - center)^k`.
    pub fn taylor(center: Rational, coeffs: Vec<Rational>) -> Self {
        let label = format!("taylor({})", describe_poly(&coeffs, &center));
        Weight1 { kind: Kind1::Taylor { center, coeffs }, label }
    }

    /// Polynomial given by its derivative values at `center`.
    pub fn from_derivs(center: Rational, derivs: &[Rational]) -> Self {
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| Rational::from(d / Integer::from(Integer::factorial(k as u32))))
            .collect();
        Self::taylor(center, coeffs)
    }

    pub fn scaled(self, k: Rational) -> Self {
        let label = format!("{}*{}", fmt_q(&k), self.label);
        Weight1 { kind: Kind1::Scaled { inner: Box::new(self), k }, label }
    }

    /// `s ↦ s·w(s)`.
    pub fn times_identity(self) -> Self {
        let label = format!("u*{}", self.label);
        Weight1 { kind: Kind1::TimesIdentity(Box::new(self)), label }
    }

    /// Expression-defined weight in the variable `x`, expanded about `center`.
    pub fn custom(expr: Expr, center: Rational) -> Result<Self, WeightError> {
        let label = format!("expr({expr})");
        let at = Scalar::from_rational(&center, CUSTOM_PRECISION);
        let mut derivs = Vec::new();
        let mut e = expr.clone();
        for _ in 0..5 {
            let v = exprs::evaluate(&e, &at)
                .map_err(|err| WeightError::Domain { weight: label.clone(), reason: err.to_string() })?;
            let f = v.to_float().ok_or_else(|| WeightError::Domain {
                weight: label.clone(),
                reason: "complex value at the expansion point".into(),
            })?;
            derivs.push(f);
            e = exprs::differentiate(&e);
        }
        Ok(Weight1 { kind: Kind1::Custom { expr, center, derivs }, label })
    }

    pub fn center(&self) -> Rational {
        match &self.kind {
            Kind1::Taylor { center, .. } | Kind1::Custom { center, .. } => center.clone(),
            Kind1::Scaled { inner, .. } => inner.center(),
            _ => Rational::new(),
        }
    }

    pub fn is_exact(&self) -> bool {
        match &self.kind {
            Kind1::Custom { .. } => false,
            Kind1::Scaled { inner, .. } | Kind1::TimesIdentity(inner) => inner.is_exact(),
            _ => true,
        }
    }

    /// Exact Taylor coefficients `c_0..c_n` about the center, or `None` for
    /// expression-defined weights.
    pub fn taylor_coeffs(&self, n: usize) -> Option<Vec<Rational>> {
        let s = QSeries::variable(n);
        let one = Rational::from(1);
        let lin = |a: &Rational, b: &Rational| QSeries::from_ints(n, &[]).add_constant(a).add(&s.scale(b));
        let series = match &self.kind {
            Kind1::King { beta } => {
                let num = lin(&one, beta);
                let den = lin(&one, &Rational::from(beta - 2u32));
                num.mul(&den.reciprocal().ok()?)
            }
            Kind1::Binomial { r } => lin(&one, &Rational::from(2u32 / r.clone())).pow_rational(r).ok()?,
            Kind1::RationalGamma { gamma } => {
                let num = QSeries::constant(one.clone(), n).add(&s.powi(2).scale(gamma).truncate(n));
                num.mul(&lin(&one, &Rational::from(-2)).reciprocal().ok()?)
            }
            Kind1::RationalA { a } => {
                let den = lin(&one, &Rational::from(-2)).add(&s.powi(2).scale(a).truncate(n));
                den.reciprocal().ok()?
            }
            Kind1::RationalC { c } => {
                let num = lin(&Rational::from(-1), &Rational::from(c - 2u32)).add(&s.powi(2).truncate(n));
                num.mul(&lin(&Rational::from(-1), c).reciprocal().ok()?)
            }
            Kind1::TruncatedP { beta } => {
                let coeffs = truncated_p_coeffs(beta);
                return Some(pad(coeffs, n));
            }
            Kind1::LinearB { b1, b2 } => return Some(pad(vec![b1.clone(), b2.clone()], n)),
            Kind1::WLee { c, r } => {
                let quad = lin(&one, &Rational::from(c + 2u32)).add(&s.powi(2).scale(r).truncate(n));
                s.mul(&quad).mul(&lin(&one, c).reciprocal().ok()?)
            }
            Kind1::Taylor { coeffs, .. } => return Some(pad(coeffs.clone(), n)),
            Kind1::Scaled { inner, k } => {
                return Some(inner.taylor_coeffs(n)?.into_iter().map(|c| c * k).collect());
            }
            Kind1::TimesIdentity(inner) => {
                if inner.center() != 0 {
                    return None;
                }
                let mut out = vec![Rational::new()];
                out.extend(inner.taylor_coeffs(n.saturating_sub(1))?);
                return Some(pad(out, n));
            }
            Kind1::Custom { .. } => return None,
        };
        Some(pad(series.coeffs().to_vec(), n))
    }

    /// Declared derivative `w^{(k)}(center)`.
    pub fn deriv(&self, k: usize) -> Option<DerivValue> {
        if let Kind1::Custom { derivs, .. } = &self.kind {
            return derivs.get(k).cloned().map(DerivValue::Approx);
        }
        if let Kind1::Scaled { inner, k: factor } = &self.kind {
            if !inner.is_exact() {
                return inner.deriv(k).map(|d| match d {
                    DerivValue::Approx(f) => DerivValue::Approx(f * factor),
                    exact => exact,
                });
            }
        }
        let c = self.taylor_coeffs(k)?.pop()?;
        Some(DerivValue::Exact(c * Integer::from(Integer::factorial(k as u32))))
    }

    /// Degree-`n` Taylor polynomial about the center, evaluated at `s`.
    pub fn eval_taylor(&self, s: &Scalar, n: usize) -> Option<Scalar> {
        let coeffs = self.taylor_coeffs(n)?;
        Some(horner(&coeffs, &(s - &q(&self.center(), s.prec()))))
    }

    /// Evaluates the weight, rejecting arguments within `2^{-prec/4}` of a pole.
    pub fn eval(&self, s: &Scalar) -> Result<Scalar, WeightError> {
        let prec = s.prec();
        let one = Scalar::one(prec);
        let label = self.label.as_str();
        match &self.kind {
            Kind1::King { beta } => {
                let den = &one + &(q(&Rational::from(beta - 2u32), prec) * s);
                guard(&den, label, &format!("u = 1/(2-β), β = {beta}"))?;
                Ok((&one + &(q(beta, prec) * s)) / den)
            }
            Kind1::Binomial { r } => {
                if *r == 0 {
                    return Err(WeightError::BadParam { weight: label.into(), reason: "r = 0".into() });
                }
                let base = &one + &(q(&Rational::from(2u32 / r.clone()), prec) * s);
                pow_rational(&base, r, label)
            }
            Kind1::RationalGamma { gamma } => {
                let den = &one - &(Scalar::from_int(2, prec) * s);
                guard(&den, label, "u = 1/2")?;
                Ok((&one + &(q(gamma, prec) * s.powi(2))) / den)
            }
            Kind1::RationalA { a } => {
                let den = &one - &(Scalar::from_int(2, prec) * s) + q(a, prec) * s.powi(2);
                guard(&den, label, "a root of 1 - 2u + a u²")?;
                Ok(one / den)
            }
            Kind1::RationalC { c } => {
                let den = q(c, prec) * s - &one;
                guard(&den, label, "u = 1/c")?;
                let num = s.powi(2) + q(&Rational::from(c - 2u32), prec) * s - one;
                Ok(num / den)
            }
            Kind1::TruncatedP { beta } => Ok(horner(&truncated_p_coeffs(beta), s)),
            Kind1::LinearB { b1, b2 } => Ok(q(b1, prec) + q(b2, prec) * s),
            Kind1::WLee { c, r } => {
                let den = &one + &(q(c, prec) * s);
                guard(&den, label, "u = -1/c")?;
                let quad = &one + &(q(&Rational::from(c + 2u32), prec) * s) + q(r, prec) * s.powi(2);
                Ok(s * &quad / den)
            }
            Kind1::Taylor { center, coeffs } => Ok(horner(coeffs, &(s - &q(center, prec)))),
            Kind1::Scaled { inner, k } => Ok(inner.eval(s)? * q(k, prec)),
            Kind1::TimesIdentity(inner) => Ok(inner.eval(s)? * s),
            Kind1::Custom { expr, .. } => exprs::evaluate(expr, s)
                .map_err(|e| WeightError::Domain { weight: label.into(), reason: e.to_string() }),
        }
    }
}

fn truncated_p_coeffs(beta: &Rational) -> Vec<Rational> {
    vec![
        Rational::from(1),
        Rational::from(2),
        beta.clone(),
        Rational::from(4) - Rational::from(2 * beta.clone()),
    ]
}

fn pad(mut coeffs: Vec<Rational>, n: usize) -> Vec<Rational> {
    coeffs.resize(n + 1, Rational::new());
    coeffs.truncate(n + 1);
    coeffs
}

fn describe_poly(coeffs: &[Rational], center: &Rational) -> String {
    let var = if *center == 0 { "s".to_string() } else { format!("(s-{center})") };
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0)
        .map(|(k, c)| match k {
            0 => c.to_string(),
            1 => format!("{c}*{var}"),
            _ => format!("{c}*{var}^{k}"),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Constructs a named univariate weight.
///
/// Names: `king(beta)`, `binomial(r)`, `rational_gamma(gamma)`,
/// `rational_a(a)`, `rational_c(c)`, `truncated_P(beta)`, `linear_B(B1,B2)`,
/// `W_lee(c,r)`, and `taylor(center?, d0, d1, ...)` with derivative values.
pub fn builtin(name: &str, params: &ParamMap) -> Result<Weight1, WeightError> {
    let key = name.to_ascii_lowercase();
    let show = |keys: &[&str]| {
        let inner: Vec<String> = keys
            .iter()
            .map(|k| format!("{k}={}", params.get(*k).map(fmt_q).unwrap_or_default()))
            .collect();
        format!("{name}({})", inner.join(","))
    };
    let (kind, label) = match key.as_str() {
        "king" => (Kind1::King { beta: param(params, name, "beta")? }, show(&["beta"])),
        "binomial" => {
            let r = param(params, name, "r")?;
            if r == 0 {
                return Err(WeightError::BadParam { weight: name.into(), reason: "r must be nonzero".into() });
            }
            (Kind1::Binomial { r }, show(&["r"]))
        }
        "rational_gamma" => (Kind1::RationalGamma { gamma: param(params, name, "gamma")? }, show(&["gamma"])),
        "rational_a" => (Kind1::RationalA { a: param(params, name, "a")? }, show(&["a"])),
        "rational_c" => (Kind1::RationalC { c: param(params, name, "c")? }, show(&["c"])),
        "truncated_p" => (Kind1::TruncatedP { beta: param(params, name, "beta")? }, show(&["beta"])),
        "linear_b" => (
            Kind1::LinearB { b1: param(params, name, "B1")?, b2: param(params, name, "B2")? },
            show(&["B1", "B2"]),
        ),
        "w_lee" => (
            Kind1::WLee { c: param(params, name, "c")?, r: param(params, name, "r")? },
            show(&["c", "r"]),
        ),
        "taylor" => {
            let center = params.get("center").cloned().unwrap_or_default();
            let mut derivs = Vec::new();
            while let Some(d) = params.get(&format!("d{}", derivs.len())) {
                derivs.push(d.clone());
            }
            if derivs.is_empty() {
                return Err(WeightError::MissingParam { weight: name.into(), param: "d0".into() });
            }
            let w = Weight1::from_derivs(center, &derivs);
            return Ok(w);
        }
        _ => return Err(WeightError::UnknownWeight(name.to_string())),
    };
    Ok(Weight1 { kind, label })
}

#[derive(Clone, Debug)]
enum Kind2 {
    TruncatedQ { beta: Rational },
    Poly { terms: BTreeMap<(usize, usize), Rational> },
    Scaled { inner: Box<Weight2>, k: Rational },
}

/// A bivariate weight `Q(u, v)` expanded about `(0, 0)`.
#[derive(Clone, Debug)]
pub struct Weight2 {
    kind: Kind2,
    label: String,
}

impl Weight2 {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Polynomial `Σ c_ij u^i v^j` from Taylor coefficients.
    pub fn poly(terms: BTreeMap<(usize, usize), Rational>) -> Self {
        let parts: Vec<String> = terms
            .iter()
            .filter(|(_, c)| **c != 0)
            .map(|((i, j), c)| format!("{c}*u^{i}*v^{j}"))
            .collect();
        let label = format!("poly2({})", parts.join(" + "));
        Weight2 { kind: Kind2::Poly { terms }, label }
    }

    /// Polynomial from partial-derivative values `∂^{i+j}Q/∂u^i∂v^j (0,0)`.
    pub fn from_partials(partials: &BTreeMap<(usize, usize), Rational>) -> Self {
        let terms = partials
            .iter()
            .map(|(&(i, j), d)| {
                let f = Integer::from(Integer::factorial(i as u32)) * Integer::from(Integer::factorial(j as u32));
                ((i, j), Rational::from(d / f))
            })
            .collect();
        Self::poly(terms)
    }

    pub fn scaled(self, k: Rational) -> Self {
        let label = format!("{}*{}", fmt_q(&k), self.label);
        Weight2 { kind: Kind2::Scaled { inner: Box::new(self), k }, label }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Exact Taylor coefficients `c_ij` with `i + j ≤ n`.
    pub fn taylor_terms(&self, n: usize) -> BTreeMap<(usize, usize), Rational> {
        let mut out = BTreeMap::new();
        match &self.kind {
            Kind2::TruncatedQ { beta } => {
                out.insert((0, 0), Rational::from(1));
                out.insert((1, 0), Rational::from(2));
                out.insert((0, 1), Rational::from(1));
                out.insert((1, 1), Rational::from(4));
                out.insert((2, 0), Rational::from(beta + 1u32));
            }
            Kind2::Poly { terms } => out = terms.clone(),
            Kind2::Scaled { inner, k } => {
                out = inner.taylor_terms(n).into_iter().map(|(ij, c)| (ij, c * k)).collect();
            }
        }
        out.retain(|&(i, j), _| i + j <= n);
        out
    }

    pub fn partial(&self, i: usize, j: usize) -> Rational {
        let c = self.taylor_terms(i + j).remove(&(i, j)).unwrap_or_default();
        c * Integer::from(Integer::factorial(i as u32)) * Integer::from(Integer::factorial(j as u32))
    }

    pub fn eval(&self, u: &Scalar, v: &Scalar) -> Result<Scalar, WeightError> {
        let prec = u.prec().max(v.prec());
        if let Kind2::Scaled { inner, k } = &self.kind {
            return Ok(inner.eval(u, v)? * q(k, prec));
        }
        let mut acc = Scalar::zero(prec);
        for ((i, j), c) in self.taylor_terms(usize::MAX / 2) {
            if c == 0 {
                continue;
            }
            acc = acc + q(&c, prec) * u.powi(i as i64) * v.powi(j as i64);
        }
        Ok(acc)
    }
}

/// Constructs a named bivariate weight: `truncated_Q(beta)` or
/// `poly2(00=.., u0=.., 0v=.., uu=.., ...)` with partial-derivative values.
pub fn builtin2(name: &str, params: &ParamMap) -> Result<Weight2, WeightError> {
    match name.to_ascii_lowercase().as_str() {
        "truncated_q" => {
            let beta = param(params, name, "beta")?;
            let label = format!("{name}(beta={beta})");
            Ok(Weight2 { kind: Kind2::TruncatedQ { beta }, label })
        }
        "poly2" => {
            let mut partials = BTreeMap::new();
            for (k, v) in params {
                let slot: Slot = format!("Q{k}").parse()?;
                let Slot::Partial(_, i, j) = slot else {
                    return Err(WeightError::UnknownSlot(k.clone()));
                };
                partials.insert((i, j), v.clone());
            }
            Ok(Weight2::from_partials(&partials))
        }
        _ => Err(WeightError::UnknownWeight(name.to_string())),
    }
}

/// A weight bound to a family slot.
#[derive(Clone, Debug)]
pub enum BoundWeight {
    Uni(Weight1),
    Bi(Weight2),
}

impl BoundWeight {
    pub fn label(&self) -> &str {
        match self {
            BoundWeight::Uni(w) => w.label(),
            BoundWeight::Bi(w) => w.label(),
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            BoundWeight::Uni(w) => w.is_exact(),
            BoundWeight::Bi(_) => true,
        }
    }

    pub fn uni(&self) -> Option<&Weight1> {
        match self {
            BoundWeight::Uni(w) => Some(w),
            BoundWeight::Bi(_) => None,
        }
    }

    pub fn bi(&self) -> Option<&Weight2> {
        match self {
            BoundWeight::Bi(w) => Some(w),
            BoundWeight::Uni(_) => None,
        }
    }
}

pub type WeightSet = BTreeMap<WeightName, BoundWeight>;

/// Declared value of `slot` in a weight set.
pub fn slot_value(ws: &WeightSet, slot: Slot) -> Option<DerivValue> {
    match (slot, ws.get(&slot.weight())?) {
        (Slot::Deriv(_, k), BoundWeight::Uni(w)) => w.deriv(k),
        (Slot::Partial(_, i, j), BoundWeight::Bi(w)) => Some(DerivValue::Exact(w.partial(i, j))),
        _ => None,
    }
}

/// Taylor data of `P(a1 h / (1 - a2 h))` scaled by `k`; the `S` weight that
/// makes the `h`-parameterized three-point step reproduce a `P`-step.
pub fn compose_with_h(p: &[Rational], a1: &Rational, a2: &Rational, k: &Rational, n: usize) -> Vec<Rational> {
    let h = QSeries::variable(n);
    let den = QSeries::constant(Rational::from(1), n).sub(&h.scale(a2));
    let u_of_h = h.scale(a1).mul(&den.reciprocal().expect("unit constant term"));
    pad(eval_poly(p, &u_of_h).scale(k).coeffs().to_vec(), n)
}

fn compose2_with_h(
    terms: &BTreeMap<(usize, usize), Rational>,
    a1: &Rational,
    a2: &Rational,
    k: &Rational,
    n: usize,
) -> BTreeMap<(usize, usize), Rational> {
    let max_j = terms.keys().map(|&(_, j)| j).max().unwrap_or(0);
    let mut out = BTreeMap::new();
    for j in 0..=max_j {
        let mut column = vec![Rational::new(); n + 1];
        for (&(i, jj), c) in terms {
            if jj == j && i <= n {
                column[i] = c.clone();
            }
        }
        for (i, c) in compose_with_h(&column, a1, a2, k, n).into_iter().enumerate() {
            if c != 0 && i + j <= n {
                out.insert((i, j), c);
            }
        }
    }
    out
}

/// Weights the solvers use when the caller binds none.
pub fn default_weights(family: Family, m: u32, params: &MethodParams) -> Result<WeightSet, WeightError> {
    let mut ws = WeightSet::new();
    let zero = Rational::new();
    let mq = Rational::from(m);
    let int = |v: i64| Rational::from(v);
    let tp0 = builtin("truncated_P", &[("beta".to_string(), zero.clone())].into_iter().collect())?;
    let tq0 = builtin2("truncated_Q", &[("beta".to_string(), zero.clone())].into_iter().collect())?;
    match family {
        Family::Schroder | Family::Li22 => {}
        Family::TwoPoint18 => {
            ws.insert(WeightName::P, BoundWeight::Uni(tp0));
        }
        Family::Zhou1 => {
            ws.insert(WeightName::G, BoundWeight::Uni(tp0.times_identity()));
        }
        Family::Lee2 => {
            let w = builtin("W_lee", &[("c".to_string(), zero.clone()), ("r".to_string(), zero)].into_iter().collect())?;
            ws.insert(WeightName::W, BoundWeight::Uni(w));
        }
        Family::Liu3 => {
            if m < 2 {
                return Err(WeightError::Domain {
                    weight: "G".into(),
                    reason: "the derivative-ratio family needs m ≥ 2".into(),
                });
            }
            let g2 = Rational::from((2 * m as i64, m as i64 - 1));
            ws.insert(WeightName::G, BoundWeight::Uni(Weight1::taylor(zero, vec![int(0), int(1), g2])));
        }
        Family::PQ12 => {
            ws.insert(WeightName::P, BoundWeight::Uni(tp0));
            ws.insert(WeightName::Q, BoundWeight::Bi(tq0));
        }
        Family::Behl4 => {
            let (a1, a2) = (&params.a1, &params.a2);
            if *a1 == 0 {
                return Err(WeightError::BadParam { weight: "S".into(), reason: "a1 must be nonzero".into() });
            }
            if *a1 == 1 && *a2 == 0 {
                ws.insert(WeightName::S, BoundWeight::Uni(tp0.scaled(mq.clone())));
                ws.insert(WeightName::R, BoundWeight::Bi(tq0.scaled(mq)));
            } else {
                let p = tp0.taylor_coeffs(TAYLOR_DEGREE).expect("exact");
                let s = compose_with_h(&p, a1, a2, &mq, TAYLOR_DEGREE);
                let r = compose2_with_h(&tq0.taylor_terms(TAYLOR_DEGREE), a1, a2, &mq, TAYLOR_DEGREE);
                ws.insert(WeightName::S, BoundWeight::Uni(Weight1::taylor(Rational::new(), s)));
                ws.insert(WeightName::R, BoundWeight::Bi(Weight2::poly(r)));
            }
        }
        Family::Hpgl15b => {
            ws.insert(WeightName::H, BoundWeight::Uni(Weight1::taylor(zero.clone(), vec![int(1), int(2)])));
            ws.insert(
                WeightName::P,
                BoundWeight::Uni(Weight1::taylor(zero.clone(), vec![int(1), int(2), int(1), int(-4)])),
            );
            ws.insert(WeightName::G, BoundWeight::Uni(Weight1::taylor(zero.clone(), vec![int(0), int(1), int(1)])));
            ws.insert(WeightName::L, BoundWeight::Uni(Weight1::taylor(zero, vec![int(1), int(2)])));
        }
        Family::Mod7b => {
            let h2 = Rational::from((m as i64 + 9, 2));
            let p2 = Rational::from((m as i64 + 11, 2));
            let p3 = Rational::from(m as i64 + 5);
            ws.insert(WeightName::H, BoundWeight::Uni(Weight1::taylor(zero.clone(), vec![int(1), int(2), h2])));
            ws.insert(WeightName::P, BoundWeight::Uni(Weight1::taylor(zero.clone(), vec![int(1), int(2), p2, p3])));
            ws.insert(WeightName::G, BoundWeight::Uni(Weight1::taylor(zero, vec![int(1), int(1)])));
        }
        Family::Zhou23 => {
            let (center, derivs) = zhou23_phi(m);
            ws.insert(WeightName::Phi, BoundWeight::Uni(Weight1::from_derivs(center, &derivs)));
        }
    }
    Ok(ws)
}

/// `t* = (m/(m+2))^{m-1}`, the limit of `f'(y)/f'(x)` at the root.
pub fn t_star(m: u32) -> Rational {
    let base = Rational::from((m as i64, m as i64 + 2));
    Rational::from(base.pow(m as i32 - 1))
}

/// Values `φ(t*), φ'(t*), φ''(t*)` that give the root-free weight step
/// order four.
pub fn zhou23_phi(m: u32) -> (Rational, Vec<Rational>) {
    let mi = m as i64;
    let ts = t_star(m);
    // φ'(t*) = -m²(m+2) / (4 t*),  φ''(t*) = m²(m+2)² / (4 t*²)
    let k = Rational::from(mi * mi * (mi + 2));
    let phi1 = Rational::from(-Rational::from(&k / (Rational::from(4) * &ts)));
    let phi2 = Rational::from(k * (mi + 2) / (Rational::from(4) * Rational::from(&ts * &ts)));
    (ts, vec![Rational::from(mi), phi1, phi2])
}

/// `A_m = ((m+2)/m)^m`.
pub fn a_m(m: u32) -> Rational {
    let base = Rational::from((m as i64 + 2, m as i64));
    Rational::from(base.pow(m as i32))
}

type Lookup<'a> = &'a dyn Fn(Slot) -> Option<Rational>;
type Requirement = Box<dyn Fn(u32, Lookup<'_>) -> Option<Rational> + Send + Sync>;

/// One required slot value, with a human-readable closed form.
pub struct Condition {
    pub slot: Slot,
    pub formula: String,
    requirement: Requirement,
}

impl Condition {
    pub fn new(
        slot: Slot,
        formula: impl Into<String>,
        requirement: impl Fn(u32, Lookup<'_>) -> Option<Rational> + Send + Sync + 'static,
    ) -> Self {
        Condition { slot, formula: formula.into(), requirement: Box::new(requirement) }
    }

    pub fn constant(slot: Slot, value: i64) -> Self {
        Condition::new(slot, value.to_string(), move |_, _| Some(Rational::from(value)))
    }

    pub fn required(&self, m: u32, lookup: Lookup<'_>) -> Option<Rational> {
        (self.requirement)(m, lookup)
    }
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.slot, self.formula)
    }
}

/// Slot requirements that give a family its optimal order.
#[derive(Debug)]
pub struct ConditionSet {
    pub family: Family,
    pub conditions: Vec<Condition>,
}

fn d(w: WeightName, k: usize) -> Slot {
    Slot::Deriv(w, k)
}

fn pq(w: WeightName, i: usize, j: usize) -> Slot {
    Slot::Partial(w, i, j)
}

impl ConditionSet {
    /// The closed-form condition set of a family, where one is known.
    ///
    /// The `h`-parameterized family only has a closed form at `a1 = 1, a2 = 0`
    /// and the rational root-free step has no weight slots; both return `None`.
    pub fn for_family(family: Family, params: &MethodParams) -> Option<ConditionSet> {
        use WeightName::*;
        let c = Condition::constant;
        let conditions = match family {
            Family::Schroder => vec![],
            Family::TwoPoint18 => vec![c(d(P, 0), 1), c(d(P, 1), 2)],
            Family::Zhou1 => vec![c(d(G, 0), 0), c(d(G, 1), 1), c(d(G, 2), 4)],
            Family::Lee2 => vec![c(d(W, 0), 0), c(d(W, 1), 1), c(d(W, 2), 4)],
            Family::Liu3 => vec![
                c(d(G, 0), 0),
                c(d(G, 1), 1),
                Condition::new(d(G, 2), "4m/(m-1)", |m, _| {
                    (m >= 2).then(|| Rational::from((4 * m as i64, m as i64 - 1)))
                }),
            ],
            Family::PQ12 => pq12_conditions(P, Q, Rational::from(1)),
            Family::Behl4 => {
                if params.a1 != 1 || params.a2 != 0 {
                    return None;
                }
                // S ≡ mP, R ≡ mQ
                let mut out = Vec::new();
                for cond in pq12_conditions(S, R, Rational::new()) {
                    let slot = cond.slot;
                    let formula = format!("m*({})", cond.formula.replace('S', "S/m").replace('R', "R/m"));
                    out.push(Condition::new(slot, formula, move |m, look| {
                        let mq = Rational::from(m);
                        let scaled = |s: Slot| look(s).map(|v| v / &mq);
                        cond.required(m, &scaled).map(|v| v * &mq)
                    }));
                }
                out
            }
            Family::Hpgl15b => vec![
                c(d(H, 0), 1),
                c(d(H, 1), 2),
                Condition::new(d(P, 1), "2*P0", |_, l| Some(l(d(P, 0))? * 2u32)),
                Condition::new(d(P, 2), "P0*(2+H2)", |_, l| Some(l(d(P, 0))? * (l(d(H, 2))? + 2u32))),
                Condition::new(d(L, 1), "2*L0", |_, l| Some(l(d(L, 0))? * 2u32)),
                Condition::new(d(P, 3), "P0*(H3+6*H2-24)", |_, l| {
                    Some(l(d(P, 0))? * (l(d(H, 3))? + l(d(H, 2))? * 6u32 - 24u32))
                }),
                c(d(G, 0), 0),
                Condition::new(d(G, 1), "1/(L0*P0)", |_, l| {
                    let lp = l(d(L, 0))? * l(d(P, 0))?;
                    (lp != 0).then(|| lp.recip())
                }),
                Condition::new(d(G, 2), "2/(L0*P0)", |_, l| {
                    let lp = l(d(L, 0))? * l(d(P, 0))?;
                    (lp != 0).then(|| Rational::from(2) / lp)
                }),
            ],
            Family::Mod7b => vec![
                c(d(H, 0), 1),
                c(d(H, 1), 2),
                c(d(P, 0), 1),
                c(d(P, 1), 2),
                Condition::new(d(P, 2), "H2+2", |_, l| Some(l(d(H, 2))? + 2u32)),
                Condition::new(d(P, 3), "H3+6*H2-24", |_, l| Some(l(d(H, 3))? + l(d(H, 2))? * 6u32 - 24u32)),
                c(d(G, 0), 1),
                c(d(G, 1), 1),
            ],
            Family::Zhou23 => vec![
                Condition::new(d(Phi, 0), "m", |m, _| Some(zhou23_phi(m).1[0].clone())),
                Condition::new(d(Phi, 1), "-m^2 (m+2)/(4 t*)", |m, _| Some(zhou23_phi(m).1[1].clone())),
                Condition::new(d(Phi, 2), "m^2 (m+2)^2/(4 t*^2)", |m, _| Some(zhou23_phi(m).1[2].clone())),
            ],
            Family::Li22 => return None,
        };
        Some(ConditionSet { family, conditions })
    }
}

/// Conditions on a `P`-type and `Q`-type weight pair; `Quuu` enters `P3`
/// when the bivariate weight carries a cubic `u` term.
fn pq12_conditions(p: WeightName, qn: WeightName, _unit: Rational) -> Vec<Condition> {
    let c = Condition::constant;
    vec![
        c(d(p, 0), 1),
        c(d(p, 1), 2),
        c(pq(qn, 0, 0), 1),
        c(pq(qn, 1, 0), 2),
        c(pq(qn, 0, 1), 1),
        c(pq(qn, 1, 1), 4),
        Condition::new(pq(qn, 2, 0), format!("{p}2+2"), move |_, l| Some(l(d(p, 2))? + 2u32)),
        Condition::new(d(p, 3), format!("24-6*{p}2+{qn}uuu"), move |_, l| {
            Some(Rational::from(24) - l(d(p, 2))? * 6u32 + l(pq(qn, 3, 0)).unwrap_or_default())
        }),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct SlotCheck {
    pub slot: String,
    pub formula: String,
    pub required: String,
    pub declared: String,
    pub pass: bool,
    pub approximate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub family: String,
    pub m: u32,
    pub checks: Vec<SlotCheck>,
    pub pass: bool,
}

/// Compares declared weight metadata with a condition set.
///
/// Exact metadata is compared exactly; expression-defined weights compare to
/// a relative tolerance of `2^{-512}` and are flagged approximate.
pub fn check_conditions(ws: &WeightSet, cs: &ConditionSet, m: u32) -> Result<ConditionReport, WeightError> {
    let lookup = |s: Slot| slot_value(ws, s).map(|v| v.to_rational());
    let mut checks = Vec::new();
    for cond in &cs.conditions {
        let declared = slot_value(ws, cond.slot).ok_or(WeightError::UnspecifiedSlot(cond.slot))?;
        let required = cond.required(m, &lookup);
        let approximate = !declared.is_exact() || ws.values().any(|w| !w.is_exact());
        let pass = match &required {
            None => false,
            Some(req) if !approximate => declared.to_rational() == *req,
            Some(req) => {
                let diff = Rational::from(&declared.to_rational() - req).abs();
                let scale = Rational::from(req.abs_ref()).max(Rational::from(1));
                let tol = Rational::from((1, Integer::from(Integer::u_pow_u(2, CUSTOM_PRECISION / 2))));
                diff <= scale * tol
            }
        };
        checks.push(SlotCheck {
            slot: cond.slot.to_string(),
            formula: cond.formula.clone(),
            required: required.map(|r| r.to_string()).unwrap_or_else(|| "undefined".into()),
            declared: declared.to_string(),
            pass,
            approximate,
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ConditionReport { family: cs.family.name().into(), m, checks, pass })
}

/// Central finite-difference estimates of `w^{(k)}(center)` for `k ≤ n`,
/// evaluated at `4·prec` bits with step `2^{-prec}`.
pub fn finite_difference_derivs(w: &Weight1, n: usize, prec: u32) -> Result<Vec<Float>, WeightError> {
    let work = 4 * prec;
    let h = Float::with_val(work, Float::i_exp(1, -(prec as i32)));
    let center = Float::with_val(work, &w.center());
    let mut out = Vec::new();
    for k in 0..=n {
        let mut acc = Float::with_val(work, 0);
        for j in 0..=k {
            let offset = Float::with_val(work, k as f64 / 2.0 - j as f64) * &h;
            let x = Scalar::real(Float::with_val(work, &center + &offset));
            let fx = w.eval(&x)?.to_float().expect("real weight value");
            let binom = Integer::from(Integer::binomial_u(k as u32, j as u32));
            let term = fx * Float::with_val(work, &binom);
            if j % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let hk = Float::with_val(work, h.clone().pow(k as u32));
        out.push(Float::with_val(prec, acc / hk));
    }
    Ok(out)
}

//! Precision-parameterized real/complex numbers and the principal m-th root.
//!
//! A [`Scalar`] is one of three representations:
//!
//! * an exact rational (kept exact under `+ - * /` and integer powers),
//! * a binary floating-point real at a stated precision,
//! * a binary floating-point complex number at a stated precision.
//!
//! Exact values degrade to floating reals the first time a transcendental or
//! an irrational root is taken; they never turn complex on their own. Mixing a
//! real and a complex operand yields a complex result; no operation on real
//! operands produces an imaginary part.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default working precision for solver demos.
pub const DEFAULT_PRECISION: u32 = 128;
/// Working precision used for order-of-convergence experiments.
pub const COC_PRECISION: u32 = 2048;

/// How m-th roots of ratios are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainMode {
    /// Iterates stay real; odd roots of negative numbers keep their sign.
    RealSignPreserving,
    /// Iterates are complex; roots follow the principal branch.
    ComplexPrincipal,
}

impl DomainMode {
    pub fn name(self) -> &'static str {
        match self {
            DomainMode::RealSignPreserving => "real",
            DomainMode::ComplexPrincipal => "complex",
        }
    }
}

impl std::str::FromStr for DomainMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" | "RealSignPreserving" => Ok(DomainMode::RealSignPreserving),
            "complex" | "ComplexPrincipal" => Ok(DomainMode::ComplexPrincipal),
            other => Err(format!("unknown domain mode `{other}` (expected real|complex)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("negative radicand with even root index {m} in real sign-preserving mode")]
    NegativeEvenRadicand { m: u32 },
    #[error("zero denominator in root ratio")]
    ZeroDenominator,
    #[error("complex value in real sign-preserving mode")]
    ModeMismatch,
    #[error("precision underflow: nonzero input produced a zero result")]
    Underflow,
    #[error("{0} is outside the domain of the operation")]
    Domain(&'static str),
    #[error("cannot parse `{0}` as a number")]
    Parse(String),
}

#[derive(Clone, Debug)]
enum Repr {
    Exact(Rational),
    Real(Float),
    Complex(Complex),
}

/// A real or complex number at a stated binary precision.
#[derive(Clone, Debug)]
pub struct Scalar {
    repr: Repr,
    prec: u32,
}

impl Scalar {
    pub fn from_int(n: i64, prec: u32) -> Self {
        Scalar { repr: Repr::Exact(Rational::from(n)), prec }
    }

    pub fn from_rational(r: &Rational, prec: u32) -> Self {
        Scalar { repr: Repr::Exact(r.clone()), prec }
    }

    pub fn from_f64(v: f64, prec: u32) -> Self {
        Scalar { repr: Repr::Real(Float::with_val(prec, v)), prec }
    }

    pub fn real(f: Float) -> Self {
        let prec = f.prec();
        Scalar { repr: Repr::Real(f), prec }
    }

    pub fn complex(c: Complex) -> Self {
        let prec = c.prec().0.max(c.prec().1);
        Scalar { repr: Repr::Complex(c), prec }
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_int(0, prec)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_int(1, prec)
    }

    pub fn pi(prec: u32) -> Self {
        Self::real(Float::with_val(prec, Constant::Pi))
    }

    pub fn euler(prec: u32) -> Self {
        Self::real(Float::with_val(prec, 1).exp())
    }

    /// The imaginary unit as a complex scalar.
    pub fn i(prec: u32) -> Self {
        Self::complex(Complex::with_val(prec, (0, 1)))
    }

    /// Parses a decimal real (`1.25`, `-3e-4`) or a complex literal
    /// (`1+0.1i`, `-2i`, `i`) rounded once at `prec` bits.
    pub fn parse(text: &str, prec: u32) -> Result<Self, ScalarError> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(ScalarError::Parse(text.to_string()));
        }
        if let Some(body) = t.strip_suffix('i') {
            // split at the last sign that is not part of an exponent
            let bytes = body.as_bytes();
            let mut split = None;
            for idx in (1..bytes.len()).rev() {
                if (bytes[idx] == b'+' || bytes[idx] == b'-')
                    && !matches!(bytes[idx - 1], b'e' | b'E')
                {
                    split = Some(idx);
                    break;
                }
            }
            let (re_txt, im_txt) = match split {
                Some(idx) => (&body[..idx], &body[idx..]),
                None => ("0", body),
            };
            let im_txt = match im_txt {
                "" | "+" => "1",
                "-" => "-1",
                s => s,
            };
            let re = parse_float(re_txt, prec).ok_or_else(|| ScalarError::Parse(text.into()))?;
            let im = parse_float(im_txt, prec).ok_or_else(|| ScalarError::Parse(text.into()))?;
            return Ok(Self::complex(Complex::with_val(prec, (re, im))));
        }
        parse_float(&t, prec)
            .map(Self::real)
            .ok_or_else(|| ScalarError::Parse(text.to_string()))
    }

    /// Parses a terminating decimal as an exact rational.
    pub fn parse_exact(text: &str, prec: u32) -> Result<Self, ScalarError> {
        parse_decimal_rational(text.trim())
            .map(|r| Self::from_rational(&r, prec))
            .ok_or_else(|| ScalarError::Parse(text.to_string()))
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact(_))
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.repr, Repr::Complex(_))
    }

    pub fn is_real(&self) -> bool {
        !self.is_complex()
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Exact(r) => *r == 0,
            Repr::Real(f) => f.is_zero(),
            Repr::Complex(c) => c.real().is_zero() && c.imag().is_zero(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.repr {
            Repr::Exact(_) => true,
            Repr::Real(f) => f.is_finite(),
            Repr::Complex(c) => c.real().is_finite() && c.imag().is_finite(),
        }
    }

    /// The exact rational value, if this scalar is still exact.
    pub fn as_rational(&self) -> Option<&Rational> {
        match &self.repr {
            Repr::Exact(r) => Some(r),
            _ => None,
        }
    }

    /// Same value with a different working precision (floats are rounded).
    pub fn with_prec(&self, prec: u32) -> Self {
        let repr = match &self.repr {
            Repr::Exact(r) => Repr::Exact(r.clone()),
            Repr::Real(f) => Repr::Real(Float::with_val(prec, f)),
            Repr::Complex(c) => Repr::Complex(Complex::with_val(prec, c)),
        };
        Scalar { repr, prec }
    }

    /// Real value as a float; `None` for complex scalars.
    pub fn to_float(&self) -> Option<Float> {
        match &self.repr {
            Repr::Exact(r) => Some(Float::with_val(self.prec, r)),
            Repr::Real(f) => Some(f.clone()),
            Repr::Complex(_) => None,
        }
    }

    pub fn to_complex(&self) -> Complex {
        match &self.repr {
            Repr::Exact(r) => Complex::with_val(self.prec, (Float::with_val(self.prec, r), 0)),
            Repr::Real(f) => Complex::with_val(self.prec, (f, 0)),
            Repr::Complex(c) => c.clone(),
        }
    }

    /// Explicit promotion to the complex representation.
    pub fn into_complex(self) -> Self {
        let c = self.to_complex();
        Self::complex(c)
    }

    /// Magnitude `|self|` as a float at the scalar's precision.
    pub fn abs(&self) -> Float {
        match &self.repr {
            Repr::Exact(r) => Float::with_val(self.prec, r).abs(),
            Repr::Real(f) => f.clone().abs(),
            Repr::Complex(c) => Float::with_val(self.prec, c.abs_ref()),
        }
    }

    pub fn re(&self) -> Float {
        match &self.repr {
            Repr::Complex(c) => c.real().clone(),
            _ => self.to_float().expect("real"),
        }
    }

    pub fn im(&self) -> Float {
        match &self.repr {
            Repr::Complex(c) => c.imag().clone(),
            _ => Float::with_val(self.prec, 0),
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.re().to_f64()
    }

    pub fn to_c64(&self) -> (f64, f64) {
        (self.re().to_f64(), self.im().to_f64())
    }

    /// Sign of a real scalar; `None` for complex.
    pub fn real_sign(&self) -> Option<Ordering> {
        match &self.repr {
            Repr::Exact(r) => Some(r.cmp0()),
            Repr::Real(f) => f.cmp0(),
            Repr::Complex(_) => None,
        }
    }

    /// Integer power. Exact scalars stay exact.
    pub fn powi(&self, n: i64) -> Self {
        let prec = self.prec;
        match &self.repr {
            Repr::Exact(r) => {
                if n < 0 && *r == 0 {
                    return Self::real(Float::with_val(prec, f64::INFINITY));
                }
                let k = n.unsigned_abs() as u32;
                let p = Rational::from(r.pow(k));
                let p = if n < 0 { p.recip() } else { p };
                Scalar { repr: Repr::Exact(p), prec }
            }
            Repr::Real(f) => Self::real(Float::with_val(prec, f.pow(n))),
            Repr::Complex(c) => Self::complex(Complex::with_val(prec, c.pow(n))),
        }
    }

    pub fn recip(&self) -> Self {
        Scalar::one(self.prec) / self
    }

    pub fn exp(&self) -> Self {
        match &self.repr {
            Repr::Complex(c) => Self::complex(c.clone().exp()),
            _ => Self::real(self.to_float().unwrap().exp()),
        }
    }

    /// Natural logarithm; real scalars require a positive argument.
    pub fn ln(&self) -> Result<Self, ScalarError> {
        match &self.repr {
            Repr::Complex(c) => {
                if self.is_zero() {
                    return Err(ScalarError::Domain("zero"));
                }
                Ok(Self::complex(c.clone().ln()))
            }
            _ => {
                let f = self.to_float().unwrap();
                if f.cmp0() != Some(Ordering::Greater) {
                    return Err(ScalarError::Domain("non-positive real"));
                }
                Ok(Self::real(f.ln()))
            }
        }
    }

    pub fn sin(&self) -> Self {
        match &self.repr {
            Repr::Complex(c) => Self::complex(c.clone().sin()),
            _ => Self::real(self.to_float().unwrap().sin()),
        }
    }

    pub fn cos(&self) -> Self {
        match &self.repr {
            Repr::Complex(c) => Self::complex(c.clone().cos()),
            _ => Self::real(self.to_float().unwrap().cos()),
        }
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_string_digits(&self, digits: usize) -> String {
        match &self.repr {
            Repr::Exact(r) => r.to_string(),
            Repr::Real(f) => f.to_string_radix(10, Some(digits)),
            Repr::Complex(c) => {
                let re = c.real().to_string_radix(10, Some(digits));
                let im = c.imag();
                let sign = if im.is_sign_negative() { '-' } else { '+' };
                let im_abs = Float::with_val(im.prec(), im.abs_ref());
                format!("{re}{sign}{}i", im_abs.to_string_radix(10, Some(digits)))
            }
        }
    }

    fn binop(
        &self,
        rhs: &Scalar,
        exact: impl FnOnce(&Rational, &Rational) -> Option<Rational>,
        real: impl FnOnce(Float, &Float) -> Float,
        cplx: impl FnOnce(Complex, &Complex) -> Complex,
    ) -> Scalar {
        let prec = self.prec.max(rhs.prec);
        if let (Repr::Exact(a), Repr::Exact(b)) = (&self.repr, &rhs.repr) {
            if let Some(r) = exact(a, b) {
                return Scalar { repr: Repr::Exact(r), prec };
            }
            // exact division by zero: fall through to floating semantics
        }
        if self.is_complex() || rhs.is_complex() {
            let a = Complex::with_val(prec, self.to_complex());
            let b = rhs.to_complex();
            return Scalar { repr: Repr::Complex(cplx(a, &b)), prec };
        }
        let a = Float::with_val(prec, self.to_float().unwrap());
        let b = rhs.to_float().unwrap();
        Scalar { repr: Repr::Real(real(a, &b)), prec }
    }
}

fn parse_float(text: &str, prec: u32) -> Option<Float> {
    match text {
        "pi" => return Some(Float::with_val(prec, Constant::Pi)),
        "-pi" => return Some(-Float::with_val(prec, Constant::Pi)),
        _ => {}
    }
    Float::parse(text).ok().map(|p| Float::with_val(prec, p))
}

/// Parses `[+-]digits[.digits][(e|E)[+-]digits]` into an exact rational.
pub fn parse_decimal_rational(text: &str) -> Option<Rational> {
    let (neg, body) = match text.as_bytes().first()? {
        b'-' => (true, &text[1..]),
        b'+' => (false, &text[1..]),
        _ => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(idx) => (&body[..idx], body[idx + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(idx) => (&mantissa[..idx], &mantissa[idx + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n = Integer::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = Integer::from(10);
    let mut r = Rational::from(n);
    if scale >= 0 {
        r *= Integer::from(ten.pow(scale as u32));
    } else {
        r /= Integer::from(ten.pow(scale.unsigned_abs()));
    }
    if neg {
        r = -r;
    }
    Some(r)
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Exact(a), Repr::Exact(b)) => a == b,
            (Repr::Real(a), Repr::Real(b)) => a == b,
            (Repr::Complex(a), Repr::Complex(b)) => a == b,
            _ => {
                if self.is_complex() || other.is_complex() {
                    self.to_complex() == other.to_complex()
                } else {
                    self.to_float() == other.to_float()
                }
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        write!(f, "{}", self.to_string_digits(digits))
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        let repr = match &self.repr {
            Repr::Exact(r) => Repr::Exact(-r.clone()),
            Repr::Real(f) => Repr::Real(-f.clone()),
            Repr::Complex(c) => Repr::Complex(-c.clone()),
        };
        Scalar { repr, prec: self.prec }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $exact:expr, $op:tt) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.binop(rhs, $exact, |a, b| a $op b, |a, b| a $op b)
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
        impl $trait<Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                self.$method(&rhs)
            }
        }
    };
}

scalar_binop!(Add, add, |a: &Rational, b: &Rational| Some(Rational::from(a + b)), +);
scalar_binop!(Sub, sub, |a: &Rational, b: &Rational| Some(Rational::from(a - b)), -);
scalar_binop!(Mul, mul, |a: &Rational, b: &Rational| Some(Rational::from(a * b)), *);
scalar_binop!(
    Div,
    div,
    |a: &Rational, b: &Rational| if *b == 0 { None } else { Some(Rational::from(a / b)) },
    /
);

/// Exact m-th root of a non-negative rational, when one exists.
fn exact_root(r: &Rational, m: u32) -> Option<Rational> {
    if r.cmp0() == Ordering::Less {
        return None;
    }
    let n = Integer::from(r.numer().root_ref(m));
    let d = Integer::from(r.denom().root_ref(m));
    if Integer::from((&n).pow(m)) == *r.numer() && Integer::from((&d).pow(m)) == *r.denom() {
        Some(Rational::from((n, d)))
    } else {
        None
    }
}

/// Principal m-th root `|z|^{1/m} (cos(θ/m) + i sin(θ/m))`, `θ = Arg z ∈ (−π, π]`.
///
/// The negative real axis belongs to the branch at `θ = +π`, so negative
/// reals have a defined principal root. The result is always complex, except
/// that `z = 0` returns an exact zero.
pub fn principal_root(z: &Scalar, m: u32) -> Result<Scalar, ScalarError> {
    assert!(m >= 1, "root index must be positive");
    let prec = z.prec;
    if z.is_zero() {
        return Ok(Scalar::zero(prec));
    }
    if m == 1 {
        return Ok(z.clone().into_complex());
    }
    let c = z.to_complex();
    let (re, im) = (c.real(), c.imag());
    let real_axis = im.is_zero();
    let modulus = Float::with_val(prec, c.abs_ref());
    let radius = modulus.root(m);
    if radius.is_zero() {
        return Err(ScalarError::Underflow);
    }
    if real_axis && re.cmp0() == Some(Ordering::Greater) {
        return Ok(Scalar::complex(Complex::with_val(prec, (radius, 0))));
    }
    if real_axis && m == 2 {
        return Ok(Scalar::complex(Complex::with_val(prec, (0, radius))));
    }
    let theta = if real_axis {
        Float::with_val(prec, Constant::Pi)
    } else {
        Float::with_val(prec, im.atan2_ref(re))
    };
    let (s, co) = (theta / m).sin_cos(Float::new(prec));
    Ok(Scalar::complex(Complex::with_val(prec, (radius.clone() * co, radius * s))))
}

/// Real m-th root with the domain policy of `mode`.
pub fn real_root(x: &Scalar, m: u32, mode: DomainMode) -> Result<Scalar, ScalarError> {
    assert!(m >= 1, "root index must be positive");
    if x.is_complex() {
        return match mode {
            DomainMode::ComplexPrincipal => principal_root(x, m),
            DomainMode::RealSignPreserving => Err(ScalarError::ModeMismatch),
        };
    }
    if m == 1 {
        return Ok(x.clone());
    }
    let negative = x.real_sign() == Some(Ordering::Less);
    if negative {
        match mode {
            DomainMode::ComplexPrincipal => return principal_root(x, m),
            DomainMode::RealSignPreserving if m % 2 == 0 => {
                return Err(ScalarError::NegativeEvenRadicand { m })
            }
            DomainMode::RealSignPreserving => {}
        }
    }
    if let Repr::Exact(r) = &x.repr {
        let mag = Rational::from(r.abs_ref());
        if let Some(root) = exact_root(&mag, m) {
            let root = if negative { -root } else { root };
            return Ok(Scalar::from_rational(&root, x.prec));
        }
    }
    let f = x.to_float().unwrap();
    let root = f.clone().root(m);
    if root.is_zero() && !f.is_zero() {
        return Err(ScalarError::Underflow);
    }
    Ok(Scalar::real(root))
}

/// `(num/den)^{1/m}` per `mode`; an exact-zero numerator gives zero.
pub fn ratio_power(
    num: &Scalar,
    den: &Scalar,
    m: u32,
    mode: DomainMode,
) -> Result<Scalar, ScalarError> {
    if den.is_zero() {
        return Err(ScalarError::ZeroDenominator);
    }
    if num.is_zero() {
        return Ok(Scalar::zero(num.prec.max(den.prec)));
    }
    real_root(&(num / den), m, mode)
}

//! Truncated power series in one variable with exact rational coefficients.
//!
//! A `QSeries` stores `c_0 .. c_N` and stands for `Σ c_k ε^k + O(ε^{N+1})`.
//! Every operation tracks how many coefficients remain exactly known, so a
//! result never reports a coefficient that its inputs did not determine.

use std::fmt;

use rug::Rational;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series has a zero constant term")]
    ZeroConstantTerm,
    #[error("rational power needs constant term 1, found {0}")]
    NonUnitConstantTerm(String),
    #[error("inner series of a composition must have zero constant term")]
    NonNilpotentInner,
    #[error("series is not divisible by ε^{0}")]
    NotDivisible(usize),
    #[error("coefficient ε^{index} requested but the series is only known to ε^{order}")]
    OutOfRange { index: usize, order: usize },
    #[error("division by a series that vanishes to its truncation order")]
    ZeroDivisor,
    #[error("family reads weight {0}, which is not bound")]
    UnboundWeight(String),
    #[error("family needs parameter {0}")]
    MissingParam(&'static str),
    #[error("the derivative-ratio family is undefined for m = 1")]
    MultiplicityOne,
    #[error("singular expansion: {0}")]
    Singular(&'static str),
}

pub type SeriesResult<T> = Result<T, SeriesError>;

#[derive(Clone, Debug, PartialEq)]
pub struct QSeries {
    coeffs: Vec<Rational>,
}

impl QSeries {
    /// Series with the given known coefficients (`order = len - 1`).
    pub fn new(coeffs: Vec<Rational>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least its constant term");
        QSeries { coeffs }
    }

    pub fn from_ints(order: usize, ints: &[i64]) -> Self {
        let mut coeffs: Vec<Rational> = ints.iter().map(|&c| Rational::from(c)).collect();
        coeffs.resize(order + 1, Rational::new());
        coeffs.truncate(order + 1);
        QSeries { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        QSeries { coeffs: vec![Rational::new(); order + 1] }
    }

    pub fn constant(c: Rational, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// The variable `ε` itself.
    pub fn variable(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = Rational::from(1);
        }
        s
    }

    /// Index of the last exactly known coefficient.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, index: usize) -> SeriesResult<&Rational> {
        self.coeffs
            .get(index)
            .ok_or(SeriesError::OutOfRange { index, order: self.order() })
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    /// First index with a nonzero coefficient, or `None` if every known
    /// coefficient vanishes.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| *c != 0)
    }

    fn effective_valuation(&self) -> usize {
        self.valuation().unwrap_or(self.coeffs.len())
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(order + 1);
        QSeries { coeffs }
    }

    pub fn add(&self, rhs: &QSeries) -> QSeries {
        let n = self.order().min(rhs.order());
        QSeries { coeffs: (0..=n).map(|k| Rational::from(&self.coeffs[k] + &rhs.coeffs[k])).collect() }
    }

    pub fn sub(&self, rhs: &QSeries) -> QSeries {
        let n = self.order().min(rhs.order());
        QSeries { coeffs: (0..=n).map(|k| Rational::from(&self.coeffs[k] - &rhs.coeffs[k])).collect() }
    }

    pub fn neg(&self) -> QSeries {
        QSeries { coeffs: self.coeffs.iter().map(|c| Rational::from(-c)).collect() }
    }

    pub fn scale(&self, k: &Rational) -> QSeries {
        QSeries { coeffs: self.coeffs.iter().map(|c| Rational::from(c * k)).collect() }
    }

    pub fn add_constant(&self, k: &Rational) -> QSeries {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    /// Product; the known order is `min(N_a + v_b, N_b + v_a)`.
    pub fn mul(&self, rhs: &QSeries) -> QSeries {
        let (va, vb) = (self.effective_valuation(), rhs.effective_valuation());
        let n = (self.order() + vb).min(rhs.order() + va);
        let mut coeffs = vec![Rational::new(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate().skip(va) {
            if i > n {
                break;
            }
            for (j, b) in rhs.coeffs.iter().enumerate().skip(vb) {
                if i + j > n {
                    break;
                }
                if *b != 0 {
                    coeffs[i + j] += Rational::from(a * b);
                }
            }
        }
        QSeries { coeffs }
    }

    pub fn reciprocal(&self) -> SeriesResult<QSeries> {
        let a0 = &self.coeffs[0];
        if *a0 == 0 {
            return Err(SeriesError::ZeroConstantTerm);
        }
        let inv0 = Rational::from(a0.recip_ref());
        let n = self.order();
        let mut b: Vec<Rational> = Vec::with_capacity(n + 1);
        b.push(inv0.clone());
        for k in 1..=n {
            let mut acc = Rational::new();
            for j in 1..=k {
                acc += Rational::from(&self.coeffs[j] * &b[k - j]);
            }
            b.push(-acc * &inv0);
        }
        Ok(QSeries { coeffs: b })
    }

    /// `self^alpha` for a rational exponent; requires `c_0 = 1`.
    pub fn pow_rational(&self, alpha: &Rational) -> SeriesResult<QSeries> {
        if self.coeffs[0] != 1 {
            return Err(SeriesError::NonUnitConstantTerm(self.coeffs[0].to_string()));
        }
        let n = self.order();
        let alpha1 = Rational::from(alpha + 1u32);
        let mut b: Vec<Rational> = Vec::with_capacity(n + 1);
        b.push(Rational::from(1));
        for k in 1..=n {
            let mut acc = Rational::new();
            for j in 1..=k {
                if self.coeffs[j] == 0 {
                    continue;
                }
                let w = Rational::from(&alpha1 * j as u64) - k as u64;
                acc += w * &self.coeffs[j] * &b[k - j];
            }
            b.push(acc / k as u64);
        }
        Ok(QSeries { coeffs: b })
    }

    /// `self^k` for a non-negative integer power.
    pub fn powi(&self, k: u32) -> QSeries {
        let mut out = QSeries::constant(Rational::from(1), self.order() + k as usize * self.effective_valuation());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Division by `ε^k`; the first `k` coefficients must vanish.
    pub fn shift_down(&self, k: usize) -> SeriesResult<QSeries> {
        if k > self.order() || self.coeffs[..k].iter().any(|c| *c != 0) {
            return Err(SeriesError::NotDivisible(k));
        }
        Ok(QSeries { coeffs: self.coeffs[k..].to_vec() })
    }

    /// Multiplication by `ε^k`.
    pub fn shift_up(&self, k: usize) -> QSeries {
        let mut coeffs = vec![Rational::new(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        QSeries { coeffs }
    }

    /// Formal derivative with respect to `ε`.
    pub fn derivative(&self) -> QSeries {
        if self.order() == 0 {
            return QSeries::zero(0);
        }
        QSeries {
            coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, c)| Rational::from(c * k as u64)).collect(),
        }
    }

    /// Quotient `self / rhs`, allowing a common power of `ε` to cancel.
    pub fn div(&self, rhs: &QSeries) -> SeriesResult<QSeries> {
        let v = rhs.valuation().ok_or(SeriesError::ZeroDivisor)?;
        let num = self.shift_down(v)?;
        let den = rhs.shift_down(v)?;
        Ok(num.mul(&den.reciprocal()?))
    }
}

/// `Σ poly[k] · inner^k` for an exact polynomial; any inner series allowed.
pub fn eval_poly(poly: &[Rational], inner: &QSeries) -> QSeries {
    let order = inner.order();
    let Some((last, rest)) = poly.split_last() else {
        return QSeries::zero(order);
    };
    let mut acc = QSeries::constant(last.clone(), order);
    for c in rest.iter().rev() {
        acc = acc.mul(inner).add_constant(c);
    }
    acc.truncate(order.min(acc.order()))
}

/// Composition `outer(inner)` for a series `outer` known to `ε^d`.
///
/// `inner` must be nilpotent; the unknown tail `O(s^{d+1})` of `outer` limits
/// the result to order `v·(d+1) - 1` where `v` is the valuation of `inner`.
pub fn compose_poly(outer: &QSeries, inner: &QSeries) -> SeriesResult<QSeries> {
    if inner.coeffs[0] != 0 {
        return Err(SeriesError::NonNilpotentInner);
    }
    let v = inner.effective_valuation();
    let tail_limit = v * (outer.order() + 1) - 1;
    let out = eval_poly(outer.coeffs(), inner);
    Ok(out.truncate(out.order().min(tail_limit)))
}

/// `Σ c_ij u^i v^j` for an exact bivariate polynomial.
pub fn eval_poly2(terms: &[((usize, usize), Rational)], u: &QSeries, v: &QSeries) -> QSeries {
    let order = u.order().min(v.order());
    let max_i = terms.iter().map(|((i, _), _)| *i).max().unwrap_or(0);
    let max_j = terms.iter().map(|((_, j), _)| *j).max().unwrap_or(0);
    let powers = |s: &QSeries, n: usize| {
        let mut out = vec![QSeries::constant(Rational::from(1), order)];
        for k in 1..=n {
            let next = out[k - 1].mul(s);
            out.push(next);
        }
        out
    };
    let (up, vp) = (powers(u, max_i), powers(v, max_j));
    let mut acc = QSeries::zero(order);
    for ((i, j), c) in terms {
        if *c == 0 {
            continue;
        }
        acc = acc.add(&up[*i].mul(&vp[*j]).scale(c));
    }
    acc
}

impl fmt::Display for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})·ε")?,
                _ => write!(f, "({c})·ε^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(ε^{})", self.order() + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn binomial_square_root() {
        let s = QSeries::from_ints(4, &[1, 1]);
        let r = s.pow_rational(&q(1, 2)).unwrap();
        assert_eq!(r.coeffs(), &[q(1, 1), q(1, 2), q(-1, 8), q(1, 16), q(-5, 128)]);
    }

    #[test]
    fn geometric_reciprocal() {
        let s = QSeries::from_ints(5, &[1, -1]);
        let r = s.reciprocal().unwrap();
        assert!(r.coeffs().iter().all(|c| *c == 1));
        assert_eq!(QSeries::zero(3).reciprocal(), Err(SeriesError::ZeroConstantTerm));
    }

    #[test]
    fn product_of_conjugates() {
        let a = QSeries::from_ints(4, &[1, 1]);
        let b = QSeries::from_ints(4, &[1, -1]);
        assert_eq!(a.mul(&b), QSeries::from_ints(4, &[1, 0, -1]));
    }

    #[test]
    fn precision_tracking() {
        // ε·(1 + O(ε^3)) is known to ε^4
        let e = QSeries::variable(6);
        let a = QSeries::from_ints(3, &[1, 2, 3, 4]);
        assert_eq!(e.mul(&a).order(), 4);
        // dividing by ε^2 loses two orders
        let b = QSeries::from_ints(6, &[0, 0, 5, 1]);
        assert_eq!(b.shift_down(2).unwrap().order(), 4);
        assert_eq!(b.shift_down(3), Err(SeriesError::NotDivisible(3)));
        assert!(matches!(b.coeff(7), Err(SeriesError::OutOfRange { index: 7, order: 6 })));
    }

    #[test]
    fn composition_requires_nilpotent_inner() {
        let outer = QSeries::from_ints(5, &[1, 1, 1, 1, 1, 1]);
        let inner = QSeries::from_ints(8, &[0, 0, 1]);
        // 1/(1-s) composed with ε^2, known to ε^11 but capped by inner order
        let c = compose_poly(&outer, &inner).unwrap();
        assert_eq!(c, QSeries::from_ints(8, &[1, 0, 1, 0, 1, 0, 1, 0, 1]));
        let short = compose_poly(&QSeries::from_ints(2, &[1, 1, 1]), &inner).unwrap();
        assert_eq!(short.order(), 5);
        assert_eq!(
            compose_poly(&outer, &QSeries::from_ints(3, &[1, 1])),
            Err(SeriesError::NonNilpotentInner)
        );
    }

    #[test]
    fn pow_requires_unit_constant() {
        let s = QSeries::from_ints(3, &[2, 1]);
        assert!(matches!(s.pow_rational(&q(1, 3)), Err(SeriesError::NonUnitConstantTerm(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit_series() -> impl Strategy<Value = QSeries> {
            prop::collection::vec((-6i64..7, 1i64..5), 6).prop_map(|cs| {
                let mut coeffs = vec![Rational::from(1)];
                coeffs.extend(cs.into_iter().map(|(n, d)| Rational::from((n, d))));
                QSeries::new(coeffs)
            })
        }

        proptest! {
            #[test]
            fn rational_power_inverts(s in unit_series(), p in 1i64..6, r in 1i64..6) {
                let there = s.pow_rational(&Rational::from((p, r))).unwrap();
                let back = there.pow_rational(&Rational::from((r, p))).unwrap();
                prop_assert_eq!(back, s);
            }

            #[test]
            fn reciprocal_is_inverse(s in unit_series()) {
                let one = s.mul(&s.reciprocal().unwrap());
                prop_assert_eq!(one, QSeries::constant(Rational::from(1), s.order()));
            }

            #[test]
            fn integer_power_matches_rational_power(s in unit_series(), k in 0u32..5) {
                prop_assert_eq!(s.powi(k).truncate(s.order()), s.pow_rational(&Rational::from(k)).unwrap());
            }
        }
    }
}

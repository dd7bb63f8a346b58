//! ε-expansions of one iteration of each family.
//!
//! `f` is normalized so that `f(x) = ε^m (1 + C_1 ε + … + C_N ε^N)`; the
//! leading factor `f^{(m)}(α)/m!` cancels from every ratio a family uses.

use std::collections::BTreeMap;

use rug::Rational;

use super::qseries::{compose_poly, eval_poly, eval_poly2, QSeries, SeriesError, SeriesResult};
use crate::family::{Family, MethodParams};
use crate::weights::{a_m, t_star, BoundWeight, Slot, WeightName, WeightSet, TAYLOR_DEGREE};

/// Concrete values for everything an expansion depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBinding {
    pub m: u32,
    /// `C_1 .. C_N`; missing entries are zero.
    pub c: Vec<Rational>,
    /// Taylor coefficients of univariate weights about their centers.
    pub uni: BTreeMap<WeightName, Vec<Rational>>,
    /// Taylor coefficients `c_ij` of bivariate weights.
    pub bi: BTreeMap<WeightName, BTreeMap<(usize, usize), Rational>>,
    pub params: MethodParams,
    /// Truncation order `N`.
    pub order: usize,
}

impl SymbolBinding {
    pub fn new(m: u32, order: usize) -> Self {
        assert!(m >= 1, "multiplicity must be positive");
        SymbolBinding {
            m,
            c: Vec::new(),
            uni: BTreeMap::new(),
            bi: BTreeMap::new(),
            params: MethodParams::default(),
            order,
        }
    }

    pub fn with_c(mut self, c: Vec<Rational>) -> Self {
        self.c = c;
        self
    }

    pub fn with_params(mut self, params: MethodParams) -> Self {
        self.params = params;
        self
    }

    /// Sets a slot from its derivative value; the weight becomes bound if
    /// it was not already (other slots read as zero).
    pub fn set_slot(&mut self, slot: Slot, value: &Rational) {
        let coeff = Rational::from(value / slot.factorial());
        match slot {
            Slot::Deriv(w, k) => {
                let v = self.uni.entry(w).or_default();
                if v.len() <= k {
                    v.resize(k + 1, Rational::new());
                }
                v[k] = coeff;
            }
            Slot::Partial(w, i, j) => {
                self.bi.entry(w).or_default().insert((i, j), coeff);
            }
        }
    }

    pub fn with_slot(mut self, slot: Slot, value: impl Into<Rational>) -> Self {
        self.set_slot(slot, &value.into());
        self
    }

    /// Derivative value of a slot; unbound weights give `None`.
    pub fn slot(&self, slot: Slot) -> Option<Rational> {
        let coeff = match slot {
            Slot::Deriv(w, k) => self.uni.get(&w)?.get(k).cloned().unwrap_or_default(),
            Slot::Partial(w, i, j) => self.bi.get(&w)?.get(&(i, j)).cloned().unwrap_or_default(),
        };
        Some(coeff * slot.factorial())
    }

    pub fn bind_weight(&mut self, name: WeightName) {
        if name.is_bivariate() {
            self.bi.entry(name).or_default();
        } else {
            self.uni.entry(name).or_default();
        }
    }

    /// Loads the exact Taylor data of bound weights.
    pub fn load_weights(&mut self, ws: &WeightSet) -> SeriesResult<()> {
        for (name, w) in ws {
            match w {
                BoundWeight::Uni(w) => {
                    let coeffs = w
                        .taylor_coeffs(TAYLOR_DEGREE)
                        .ok_or_else(|| SeriesError::UnboundWeight(format!("{name} (no exact Taylor data)")))?;
                    self.uni.insert(*name, coeffs);
                }
                BoundWeight::Bi(w) => {
                    self.bi.insert(*name, w.taylor_terms(TAYLOR_DEGREE));
                }
            }
        }
        Ok(())
    }

    /// Nonzero slots, as derivative values, for reporting.
    pub fn slots(&self) -> Vec<(Slot, Rational)> {
        let mut out = Vec::new();
        for (w, coeffs) in &self.uni {
            for k in 0..coeffs.len() {
                let s = Slot::Deriv(*w, k);
                let v = self.slot(s).unwrap_or_default();
                if v != 0 {
                    out.push((s, v));
                }
            }
        }
        for (w, terms) in &self.bi {
            for &(i, j) in terms.keys() {
                let s = Slot::Partial(*w, i, j);
                let v = self.slot(s).unwrap_or_default();
                if v != 0 {
                    out.push((s, v));
                }
            }
        }
        out
    }

    fn uni_coeffs(&self, name: WeightName) -> SeriesResult<&[Rational]> {
        self.uni.get(&name).map(Vec::as_slice).ok_or_else(|| SeriesError::UnboundWeight(name.to_string()))
    }

    fn bi_terms(&self, name: WeightName) -> SeriesResult<Vec<((usize, usize), Rational)>> {
        let terms = self.bi.get(&name).ok_or_else(|| SeriesError::UnboundWeight(name.to_string()))?;
        Ok(terms.iter().map(|(k, v)| (*k, v.clone())).collect())
    }
}

/// All intermediate expansions of one step.
#[derive(Clone, Debug)]
pub struct Expansion {
    /// `f(x)/f'(x)`.
    pub newt: QSeries,
    /// Error of the first substep.
    pub ey: QSeries,
    /// Error of the second substep of three-point families.
    pub ez: Option<QSeries>,
    /// Error of the new iterate.
    pub error: QSeries,
    pub u: Option<QSeries>,
    pub v: Option<QSeries>,
    /// Derivative ratio of the derivative-ratio and root-free families.
    pub t: Option<QSeries>,
}

/// Pieces shared by all families.
struct Base {
    m: Rational,
    mu: u32,
    fxx: QSeries,
    dxx: QSeries,
    e: QSeries,
    newt: QSeries,
}

impl Base {
    fn new(b: &SymbolBinding) -> SeriesResult<Self> {
        let n = b.order;
        let mut f = vec![Rational::from(1)];
        f.extend((1..=n).map(|k| b.c.get(k - 1).cloned().unwrap_or_default()));
        let fxx = QSeries::new(f);
        let m = Rational::from(b.m);
        // f'(x) = ε^{m-1} D(ε) with D = Σ (m+k) C_k ε^k
        let dxx = QSeries::new(
            fxx.coeffs().iter().enumerate().map(|(k, c)| Rational::from(c * (b.m as u64 + k as u64))).collect(),
        );
        let e = QSeries::variable(n);
        let newt = e.mul(&fxx).mul(&dxx.reciprocal()?);
        Ok(Base { m, mu: b.m, fxx, dxx, e, newt })
    }

    /// `(f(s1)/f(s0))^{1/m}` given `f(s_i) = s_i^m F_i`.
    fn root_ratio(&self, s1: &QSeries, f1: &QSeries, s0: &QSeries, f0: &QSeries) -> SeriesResult<QSeries> {
        let ratio = f1.mul(&f0.reciprocal()?).pow_rational(&Rational::from((1, self.mu)))?;
        Ok(ratio.mul(&s1.div(s0)?))
    }

    fn f_at(&self, s: &QSeries) -> SeriesResult<QSeries> {
        compose_poly(&self.fxx, s)
    }

    fn schroder(&self) -> QSeries {
        self.e.sub(&self.newt.scale(&self.m))
    }

    /// `f'(y)/f'(x)` for the root-free families' `y`.
    fn derivative_ratio(&self, ey: &QSeries) -> SeriesResult<QSeries> {
        let dyy = compose_poly(&self.dxx, ey)?;
        let ratio = dyy.mul(&self.dxx.reciprocal()?);
        Ok(ey.div(&self.e)?.powi(self.mu - 1).mul(&ratio))
    }
}

/// Error series `ε̂ = Σ T_r ε^r` of one step of `family`.
pub fn expand_family(family: Family, b: &SymbolBinding) -> SeriesResult<QSeries> {
    Ok(expand_full(family, b)?.error)
}

pub fn expand_full(family: Family, b: &SymbolBinding) -> SeriesResult<Expansion> {
    let base = Base::new(b)?;
    let m = &base.m;
    let newt = &base.newt;
    let mut out = Expansion {
        newt: newt.clone(),
        ey: base.schroder(),
        ez: None,
        error: QSeries::zero(0),
        u: None,
        v: None,
        t: None,
    };
    let two = Rational::from(2);
    match family {
        Family::Schroder => {
            out.error = out.ey.clone();
        }
        Family::TwoPoint18 | Family::Zhou1 => {
            let ey = &out.ey;
            let u = base.root_ratio(ey, &base.f_at(ey)?, &base.e, &base.fxx)?;
            let corr = if family == Family::TwoPoint18 {
                u.mul(&eval_poly(b.uni_coeffs(WeightName::P)?, &u).scale(m))
            } else {
                eval_poly(b.uni_coeffs(WeightName::G)?, &u).scale(m)
            };
            out.error = ey.sub(&corr.mul(newt));
            out.u = Some(u);
        }
        Family::Lee2 => {
            let lam = &b.params.lambda;
            let one = Rational::from(1);
            let shifted = |k: &Rational| -> SeriesResult<QSeries> {
                Ok(newt.mul(&newt.scale(&Rational::from(lam * k)).add_constant(&one).reciprocal()?))
            };
            let ey = base.e.sub(&shifted(&one)?.scale(m));
            let u = base.root_ratio(&ey, &base.f_at(&ey)?, &base.e, &base.fxx)?;
            let w = eval_poly(b.uni_coeffs(WeightName::W)?, &u).scale(m);
            out.error = ey.sub(&w.mul(&shifted(&two)?));
            out.ey = ey;
            out.u = Some(u);
        }
        Family::Liu3 => {
            if b.m < 2 {
                return Err(SeriesError::MultiplicityOne);
            }
            let ey = &out.ey;
            let dyy = compose_poly(&base.dxx, ey)?;
            let ratio = dyy.mul(&base.dxx.reciprocal()?).pow_rational(&Rational::from((1, b.m - 1)))?;
            let t = ey.div(&base.e)?.mul(&ratio);
            let g = eval_poly(b.uni_coeffs(WeightName::G)?, &t).scale(m);
            out.error = ey.sub(&g.mul(newt));
            out.t = Some(t);
        }
        Family::PQ12 | Family::Behl4 | Family::Hpgl15b | Family::Mod7b => {
            let ey = out.ey.clone();
            let fy = base.f_at(&ey)?;
            let u = base.root_ratio(&ey, &fy, &base.e, &base.fxx)?;
            let h = if family == Family::Behl4 {
                let (a1, a2) = (&b.params.a1, &b.params.a2);
                if *a1 == 0 {
                    return Err(SeriesError::Singular("a1 = 0"));
                }
                Some(u.mul(&u.scale(a2).add_constant(a1).reciprocal()?))
            } else {
                None
            };
            let zcorr = match family {
                Family::PQ12 => u.mul(&eval_poly(b.uni_coeffs(WeightName::P)?, &u).scale(m)),
                Family::Behl4 => u.mul(&eval_poly(b.uni_coeffs(WeightName::S)?, h.as_ref().unwrap())),
                _ => u.mul(&eval_poly(b.uni_coeffs(WeightName::H)?, &u).scale(m)),
            };
            let ez = ey.sub(&zcorr.mul(newt));
            let fz = base.f_at(&ez)?;
            let v = base.root_ratio(&ez, &fz, &ey, &fy)?;
            let uv = u.mul(&v);
            let xcorr = match family {
                Family::PQ12 => uv.mul(&eval_poly2(&b.bi_terms(WeightName::Q)?, &u, &v).scale(m)),
                Family::Behl4 => uv.mul(&eval_poly2(&b.bi_terms(WeightName::R)?, h.as_ref().unwrap(), &v)),
                Family::Hpgl15b => {
                    let p = eval_poly(b.uni_coeffs(WeightName::P)?, &u);
                    let g = eval_poly(b.uni_coeffs(WeightName::G)?, &v);
                    let l = eval_poly(b.uni_coeffs(WeightName::L)?, &uv);
                    u.mul(&p).mul(&g).mul(&l).scale(m)
                }
                _ => {
                    let p = eval_poly(b.uni_coeffs(WeightName::P)?, &u);
                    let g = eval_poly(b.uni_coeffs(WeightName::G)?, &v);
                    let factor = uv.scale(&two).add_constant(&Rational::from(1));
                    uv.mul(&factor).mul(&p).mul(&g).scale(m)
                }
            };
            out.error = ez.sub(&xcorr.mul(newt));
            out.ez = Some(ez);
            out.u = Some(u);
            out.v = Some(v);
        }
        Family::Li22 | Family::Zhou23 => {
            let step = Rational::from((2 * b.m as i64, b.m as i64 + 2));
            let ey = base.e.sub(&newt.scale(&step));
            let t = base.derivative_ratio(&ey)?;
            let phi = if family == Family::Li22 {
                let r = b.params.r_m.as_ref().ok_or(SeriesError::MissingParam("R_m"))?;
                let mi = b.m as i64;
                let a = Rational::from((mi * (mi - 2), 2)) * a_m(b.m);
                let num = t.scale(&a).add_constant(&Rational::from((-mi * mi, 2)));
                let den = t.scale(&Rational::from(-r)).add_constant(&Rational::from(1));
                if *den.coeff(0)? == 0 {
                    return Err(SeriesError::Singular("1 - R_m t* = 0"));
                }
                num.mul(&den.reciprocal()?)
            } else {
                let ts = t_star(b.m);
                let shifted = t.add_constant(&Rational::from(-ts));
                eval_poly(b.uni_coeffs(WeightName::Phi)?, &shifted)
            };
            out.error = base.e.sub(&phi.mul(newt));
            out.ey = ey;
            out.t = Some(t);
        }
    }
    Ok(out)
}

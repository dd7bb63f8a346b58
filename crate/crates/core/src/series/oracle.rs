//! Order oracle: observed order, leading-coefficient checks and condition
//! derivation by annihilating successive ε-coefficients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;
use serde::Serialize;
use thiserror::Error;

use super::expand::{expand_family, expand_full, SymbolBinding};
use super::qseries::{QSeries, SeriesError, SeriesResult};
use crate::family::{Family, MethodParams};
use crate::weights::{a_m, default_weights, Slot, WeightName};

/// Truncation order of the full three-point expansions.
pub const DEFAULT_ORDER: usize = 8;

/// A nonzero rational `p/q`, `p ∈ [-9, 9] \ {0}`, `q ∈ [1, 4]`.
pub fn random_rational(rng: &mut impl Rng) -> Rational {
    let p: i64 = rng.gen_range(1..=9) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let q: i64 = rng.gen_range(1..=4);
    Rational::from((p, q))
}

pub fn random_c(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| random_rational(rng)).collect()
}

/// Index of the first nonzero coefficient, or `order + 1` if none.
pub fn first_nonzero(s: &QSeries) -> usize {
    s.valuation().unwrap_or(s.order() + 1)
}

/// Minimum over `trials` fresh random `C`-bindings of the index of the
/// first nonzero error coefficient. `b.order + 1` means no nonzero
/// coefficient up to the truncation order.
pub fn observed_order(family: Family, b: &SymbolBinding, trials: usize, seed: u64) -> SeriesResult<usize> {
    assert!(trials >= 1, "at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = usize::MAX;
    for _ in 0..trials {
        let trial = b.clone().with_c(random_c(&mut rng, b.order));
        best = best.min(first_nonzero(&expand_family(family, &trial)?));
    }
    Ok(best)
}

/// Binding with the family's published conditions and random values for
/// every slot those conditions leave free.
pub fn condition_binding(family: Family, m: u32, rng: &mut impl Rng) -> SymbolBinding {
    use WeightName::*;
    let mut b = SymbolBinding::new(m, DEFAULT_ORDER);
    let d = Slot::Deriv;
    let pq = Slot::Partial;
    let mut r = || random_rational(rng);
    let int = |v: i64| Rational::from(v);
    match family {
        Family::Schroder => {}
        Family::TwoPoint18 => {
            b = b.with_slot(d(P, 0), 1).with_slot(d(P, 1), 2).with_slot(d(P, 2), r()).with_slot(d(P, 3), r());
        }
        Family::Zhou1 => {
            b = b.with_slot(d(G, 0), 0).with_slot(d(G, 1), 1).with_slot(d(G, 2), 4).with_slot(d(G, 3), r());
        }
        Family::Lee2 => {
            b = b.with_slot(d(W, 0), 0).with_slot(d(W, 1), 1).with_slot(d(W, 2), 4).with_slot(d(W, 3), r());
        }
        Family::Liu3 => {
            let g2 = Rational::from((4 * m as i64, m as i64 - 1));
            b = b.with_slot(d(G, 0), 0).with_slot(d(G, 1), 1).with_slot(d(G, 2), g2).with_slot(d(G, 3), r());
        }
        Family::PQ12 | Family::Behl4 => {
            let (pw, qw, k) = if family == Family::PQ12 { (P, Q, int(1)) } else { (S, R, int(m as i64)) };
            let p2 = r();
            let p3 = int(24) - p2.clone() * 6u32;
            let vals = [
                (d(pw, 0), int(1)),
                (d(pw, 1), int(2)),
                (d(pw, 2), p2.clone()),
                (d(pw, 3), p3),
                (d(pw, 4), r()),
                (pq(qw, 0, 0), int(1)),
                (pq(qw, 1, 0), int(2)),
                (pq(qw, 0, 1), int(1)),
                (pq(qw, 1, 1), int(4)),
                (pq(qw, 2, 0), p2 + 2u32),
                (pq(qw, 0, 2), r()),
            ];
            for (s, v) in vals {
                b.set_slot(s, &(v * &k));
            }
        }
        Family::Hpgl15b => {
            let (h2, h3, p0, l0) = (r(), r(), r(), r());
            let lp = Rational::from(&l0 * &p0);
            let vals = [
                (d(H, 0), int(1)),
                (d(H, 1), int(2)),
                (d(H, 2), h2.clone()),
                (d(H, 3), h3.clone()),
                (d(P, 0), p0.clone()),
                (d(P, 1), p0.clone() * 2u32),
                (d(P, 2), p0.clone() * (h2.clone() + 2u32)),
                (d(P, 3), p0.clone() * (h3 + h2 * 6u32 - 24u32)),
                (d(P, 4), r()),
                (d(L, 0), l0.clone()),
                (d(L, 1), l0 * 2u32),
                (d(L, 2), r()),
                (d(G, 0), int(0)),
                (d(G, 1), lp.clone().recip()),
                (d(G, 2), int(2) / lp),
                (d(G, 3), r()),
            ];
            for (s, v) in vals {
                b.set_slot(s, &v);
            }
        }
        Family::Mod7b => {
            let h3 = r();
            let mi = m as i64;
            let vals = [
                (d(H, 0), int(1)),
                (d(H, 1), int(2)),
                (d(H, 2), int(mi + 9)),
                (d(H, 3), h3.clone()),
                (d(P, 0), int(1)),
                (d(P, 1), int(2)),
                (d(P, 2), int(mi + 11)),
                (d(P, 3), h3 + (30 + 6 * mi)),
                (d(P, 4), r()),
                (d(G, 0), int(1)),
                (d(G, 1), int(1)),
                (d(G, 2), r()),
            ];
            for (s, v) in vals {
                b.set_slot(s, &v);
            }
        }
        Family::Li22 => {
            b.params = MethodParams { r_m: Some(a_m(m)), ..MethodParams::default() };
        }
        Family::Zhou23 => {
            let ws = default_weights(family, m, &MethodParams::default()).expect("defaults");
            b.load_weights(&ws).expect("exact");
            b.set_slot(d(Phi, 3), &r());
        }
    }
    b
}

/// `(-2m C1 C2 + C1³ (9 + m - P2)) / (2m³)`, the ε⁴ coefficient of the
/// two-point error (and of the three-point `z` error).
pub fn two_point_leading(m: u32, c: &[Rational], p2: &Rational) -> Rational {
    let mq = Rational::from(m);
    let (c1, c2) = (&c[0], &c[1]);
    let t1 = Rational::from(-2 * m as i64) * c1 * c2;
    let t2 = Rational::from(c1 * c1) * c1 * (Rational::from(9 + m as i64) - p2);
    (t1 + t2) / (Rational::from(2) * mq.clone() * &mq * &mq)
}

/// The printed ε⁸ coefficient of the three-point `P`/`Q` family, reading
/// `Q_tt` as `Q_vv` and `P_4` as `P''''(0)`.
pub fn eighth_order_leading(m: u32, c: &[Rational], p2: &Rational, p4: &Rational, qtt: &Rational) -> Rational {
    let mq = Rational::from(m);
    let (c1, c2, c3) = (&c[0], &c[1], &c[2]);
    let r = |v: i64| Rational::from(v);
    let pw = |x: &Rational, k: u32| -> Rational {
        let mut out = r(1);
        for _ in 0..k {
            out *= x;
        }
        out
    };
    let k9 = mq.clone() - p2 + 9u32; // m - P2 + 9
    let first = pw(c1, 2) * &k9 - r(2) * &mq * c2;
    let bracket = pw(c1, 4)
        * (r(-14) * pw(&mq, 2) + r(3) * qtt * pw(&k9, 2) + r(6) * &mq * p2 - r(204) * &mq + r(150) * p2
            - p4
            - r(1054))
        - r(12) * &mq * pw(c1, 2) * c2 * (qtt.clone() * &k9 - r(4) * &mq + p2 - r(34))
        - r(24) * pw(&mq, 2) * c1 * c3
        + r(12) * pw(&mq, 2) * pw(c2, 2) * (qtt.clone() - r(2));
    let total = c1.clone() * first * bracket;
    -total / (r(48) * pw(&mq, 7))
}

#[derive(Clone, Debug, Serialize)]
pub struct LeadingCoefficient {
    pub series: String,
    pub order: usize,
    pub computed: String,
    pub paper_formula: String,
    #[serde(rename = "match")]
    pub matches: bool,
}

/// Compares the first nonzero coefficient with the published closed form:
/// the ε⁴ coefficient for the two-point `P` family and for the `z` error of
/// the `P`/`Q` family, and the ε⁸ coefficient of the `P`/`Q` family.
pub fn leading_coefficient_check(family: Family, b: &SymbolBinding) -> SeriesResult<Vec<LeadingCoefficient>> {
    let x = expand_full(family, b)?;
    let p = |k| b.slot(Slot::Deriv(WeightName::P, k)).unwrap_or_default();
    let mut c = b.c.clone();
    c.resize(8, Rational::new());
    let mut out = Vec::new();
    let mut push = |series: &str, s: &QSeries, order: usize, formula: Rational| -> SeriesResult<()> {
        let computed = s.coeff(order)?.clone();
        out.push(LeadingCoefficient {
            series: series.into(),
            order,
            matches: computed == formula,
            computed: computed.to_string(),
            paper_formula: formula.to_string(),
        });
        Ok(())
    };
    match family {
        Family::TwoPoint18 => push("error", &x.error, 4, two_point_leading(b.m, &c, &p(2)))?,
        Family::PQ12 => {
            push("z error", x.ez.as_ref().expect("three-point"), 4, two_point_leading(b.m, &c, &p(2)))?;
            let qvv = b.slot(Slot::Partial(WeightName::Q, 0, 2)).unwrap_or_default();
            push("error", &x.error, 8, eighth_order_leading(b.m, &c, &p(2), &p(4), &qvv))?;
        }
        _ => {}
    }
    Ok(out)
}

/// JSON report of one oracle run.
#[derive(Clone, Debug, Serialize)]
pub struct OrderReport {
    pub family: String,
    pub m: u32,
    pub conditions: BTreeMap<String, String>,
    pub observed_order: usize,
    pub claimed_order: u32,
    pub truncation_order: usize,
    pub leading_coefficient: Vec<LeadingCoefficient>,
}

pub fn order_report(family: Family, b: &SymbolBinding, trials: usize, seed: u64) -> SeriesResult<OrderReport> {
    let observed = observed_order(family, b, trials, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let check = b.clone().with_c(random_c(&mut rng, b.order));
    let leading = leading_coefficient_check(family, &check)?;
    let mut conditions: BTreeMap<String, String> =
        b.slots().into_iter().map(|(s, v)| (s.to_string(), v.to_string())).collect();
    if let Some(r) = &b.params.r_m {
        conditions.insert("R_m".into(), r.to_string());
    }
    Ok(OrderReport {
        family: family.name().into(),
        m: b.m,
        conditions,
        observed_order: observed,
        claimed_order: family.claimed_order(),
        truncation_order: b.order,
        leading_coefficient: leading,
    })
}

// ---------------------------------------------------------------------------
// condition derivation

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeriveError {
    #[error("coefficient of ε^{order} in the {stage} error is not affine in the unknown slots")]
    NotAffine { stage: &'static str, order: usize },
    #[error("coefficient of ε^{order} in the {stage} error cannot vanish for any slot values")]
    Inconsistent { stage: &'static str, order: usize },
    #[error("slots {0:?} are constrained but not determined")]
    Underdetermined(Vec<String>),
    #[error("derived value of {slot} is not affine in the free slots")]
    FreeNotAffine { slot: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `constant + Σ coeff·slot`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub constant: Rational,
    pub terms: Vec<(Slot, Rational)>,
}

impl Affine {
    pub fn constant(c: Rational) -> Self {
        Affine { constant: c, terms: Vec::new() }
    }

    pub fn as_constant(&self) -> Option<&Rational> {
        self.terms.is_empty().then_some(&self.constant)
    }

    pub fn eval(&self, lookup: impl Fn(Slot) -> Rational) -> Rational {
        let mut v = self.constant.clone();
        for (s, k) in &self.terms {
            v += lookup(*s) * k;
        }
        v
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for (s, k) in &self.terms {
            let term = if *k == 1 {
                s.to_string()
            } else if *k == -1 {
                format!("-{s}")
            } else {
                format!("{k}*{s}")
            };
            parts.push(term);
        }
        if self.constant != 0 || parts.is_empty() {
            parts.push(self.constant.to_string());
        }
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            if let Some(rest) = p.strip_prefix('-') {
                out.push_str(&format!(" - {rest}"));
            } else {
                out.push_str(&format!(" + {p}"));
            }
        }
        f.write_str(&out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Derived {
    Value(Affine),
    /// The slot never enters a coefficient below the target order.
    Arbitrary,
}

impl fmt::Display for Derived {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Derived::Value(a) => write!(f, "{a}"),
            Derived::Arbitrary => f.write_str("arbitrary"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DerivedConditions {
    pub family: Family,
    pub m: u32,
    pub values: Vec<(Slot, Derived)>,
    /// Slot values held fixed during the derivation.
    pub fixed: Vec<(Slot, Rational)>,
    pub free: Vec<Slot>,
}

impl DerivedConditions {
    pub fn get(&self, slot: Slot) -> Option<&Derived> {
        self.values.iter().find(|(s, _)| *s == slot).map(|(_, d)| d)
    }

    /// Constant value of a slot, if it was determined as one.
    pub fn constant(&self, slot: Slot) -> Option<Rational> {
        match self.get(slot)? {
            Derived::Value(a) => a.as_constant().cloned(),
            Derived::Arbitrary => None,
        }
    }
}

/// What to solve for: ordered unknown slots, slots kept symbolic (the
/// result is affine in them), and a base binding fixing everything else.
#[derive(Clone, Debug)]
pub struct DeriveRequest {
    pub family: Family,
    pub unknowns: Vec<Slot>,
    pub free: Vec<Slot>,
    pub base: SymbolBinding,
    pub seed: u64,
}

impl DeriveRequest {
    /// The slots the published conditions name, with the conventional free
    /// slots kept symbolic.
    pub fn standard(family: Family, m: u32) -> DeriveRequest {
        use WeightName::*;
        let d = Slot::Deriv;
        let pq = Slot::Partial;
        let mut base = SymbolBinding::new(m, DEFAULT_ORDER);
        for w in family.weight_names() {
            base.bind_weight(*w);
        }
        let (unknowns, free) = match family {
            Family::Schroder => (vec![], vec![]),
            Family::Li22 => {
                base.params.r_m = Some(a_m(m));
                (vec![], vec![])
            }
            Family::TwoPoint18 => (vec![d(P, 0), d(P, 1), d(P, 2)], vec![]),
            Family::Zhou1 => (vec![d(G, 0), d(G, 1), d(G, 2), d(G, 3)], vec![]),
            Family::Lee2 => (vec![d(W, 0), d(W, 1), d(W, 2), d(W, 3)], vec![]),
            Family::Liu3 => (vec![d(G, 0), d(G, 1), d(G, 2), d(G, 3)], vec![]),
            Family::PQ12 | Family::Behl4 => {
                let (p, q) = if family == Family::PQ12 { (P, Q) } else { (S, R) };
                (
                    vec![
                        d(p, 0),
                        d(p, 1),
                        pq(q, 0, 0),
                        pq(q, 1, 0),
                        pq(q, 0, 1),
                        pq(q, 1, 1),
                        pq(q, 2, 0),
                        d(p, 3),
                    ],
                    vec![d(p, 2)],
                )
            }
            Family::Hpgl15b => {
                base.set_slot(d(P, 0), &Rational::from(1));
                base.set_slot(d(L, 0), &Rational::from(1));
                (
                    vec![d(H, 0), d(H, 1), d(P, 1), d(L, 1), d(G, 0), d(G, 1), d(G, 2), d(P, 2), d(P, 3)],
                    vec![d(H, 2), d(H, 3)],
                )
            }
            Family::Mod7b => {
                base.set_slot(d(P, 0), &Rational::from(1));
                (
                    vec![d(H, 0), d(H, 1), d(P, 1), d(G, 0), d(G, 1), d(P, 2), d(P, 3)],
                    vec![d(H, 2), d(H, 3)],
                )
            }
            Family::Zhou23 => (vec![d(Phi, 0), d(Phi, 1), d(Phi, 2), d(Phi, 3)], vec![]),
        };
        DeriveRequest { family, unknowns, free, base, seed: 0x5eed }
    }
}

struct Stage {
    name: &'static str,
    target: usize,
}

fn stages(family: Family) -> Vec<Stage> {
    let mut out = Vec::new();
    if family.has_z_stage() {
        out.push(Stage { name: "z", target: 4 });
    }
    out.push(Stage { name: "final", target: family.claimed_order() as usize });
    out
}

fn stage_series(family: Family, b: &SymbolBinding, stage: &Stage) -> SeriesResult<QSeries> {
    let x = expand_full(family, b)?;
    Ok(if stage.name == "z" { x.ez.expect("three-point family") } else { x.error })
}

/// Gauss–Jordan elimination over ℚ; rows are `[a_1 .. a_k | rhs]`.
/// Returns `None` on an inconsistent row, else the reduced rows.
fn rref(mut rows: Vec<Vec<Rational>>, k: usize) -> Option<Vec<Vec<Rational>>> {
    let mut pivot_row = 0;
    for col in 0..k {
        let Some(p) = (pivot_row..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(pivot_row, p);
        let inv = Rational::from(rows[pivot_row][col].recip_ref());
        for x in rows[pivot_row].iter_mut() {
            *x *= &inv;
        }
        for r in 0..rows.len() {
            if r != pivot_row && rows[r][col] != 0 {
                let factor = rows[r][col].clone();
                for c in 0..=k {
                    let delta = Rational::from(&factor * &rows[pivot_row][c]);
                    rows[r][c] -= delta;
                }
            }
        }
        pivot_row += 1;
    }
    if rows[pivot_row..].iter().any(|row| row[k] != 0) {
        return None;
    }
    rows.truncate(pivot_row);
    Some(rows)
}

/// Values of every unknown for one fixed assignment of the free slots;
/// `None` marks a slot that never enters a coefficient.
fn derive_once(req: &DeriveRequest, base: &SymbolBinding) -> Result<BTreeMap<Slot, Option<Rational>>, DeriveError> {
    let family = req.family;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let bindings: Vec<Vec<Rational>> =
        (0..req.unknowns.len() + 3).map(|_| random_c(&mut rng, base.order)).collect();
    let mut fixed: BTreeMap<Slot, Rational> = BTreeMap::new();
    let mut appeared: BTreeSet<Slot> = BTreeSet::new();
    for stage in stages(family) {
        for r in 0..stage.target {
            let open: Vec<Slot> = req.unknowns.iter().copied().filter(|s| !fixed.contains_key(s)).collect();
            let k = open.len();
            let assign = |values: &[Rational], c: &[Rational]| {
                let mut b = base.clone().with_c(c.to_vec());
                for (s, v) in &fixed {
                    b.set_slot(*s, v);
                }
                for (s, v) in open.iter().zip(values) {
                    b.set_slot(*s, v);
                }
                b
            };
            let mut rows = Vec::new();
            for c in &bindings {
                let zero = vec![Rational::new(); k];
                let s0 = stage_series(family, &assign(&zero, c), &stage)?;
                let mut slopes: Vec<QSeries> = Vec::with_capacity(k);
                for j in 0..k {
                    let mut unit = zero.clone();
                    unit[j] = Rational::from(1);
                    slopes.push(stage_series(family, &assign(&unit, c), &stage)?.sub(&s0));
                }
                let probe: Vec<Rational> = (0..k).map(|_| random_rational(&mut rng)).collect();
                let sp = stage_series(family, &assign(&probe, c), &stage)?;
                for order in 0..=r {
                    let c0 = s0.coeff(order)?.clone();
                    let a: Vec<Rational> = slopes.iter().map(|s| s.coeff(order).cloned()).collect::<Result<_, _>>()?;
                    let mut predicted = c0.clone();
                    for (aj, pj) in a.iter().zip(&probe) {
                        predicted += Rational::from(aj * pj);
                    }
                    if predicted != *sp.coeff(order)? {
                        return Err(DeriveError::NotAffine { stage: stage.name, order });
                    }
                    for (j, aj) in a.iter().enumerate() {
                        if *aj != 0 {
                            appeared.insert(open[j]);
                        }
                    }
                    let mut row = a;
                    row.push(-c0);
                    rows.push(row);
                }
            }
            let reduced = rref(rows, k).ok_or(DeriveError::Inconsistent { stage: stage.name, order: r })?;
            for row in reduced {
                let nz: Vec<usize> = (0..k).filter(|&j| row[j] != 0).collect();
                if nz.len() == 1 {
                    fixed.insert(open[nz[0]], row[k].clone());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    let mut loose = Vec::new();
    for s in &req.unknowns {
        match fixed.get(s) {
            Some(v) => {
                out.insert(*s, Some(v.clone()));
            }
            None if appeared.contains(s) => loose.push(s.to_string()),
            None => {
                out.insert(*s, None);
            }
        }
    }
    if !loose.is_empty() {
        return Err(DeriveError::Underdetermined(loose));
    }
    Ok(out)
}

/// Solves for the unknown slots by annihilating ε-coefficients stage by
/// stage (the `z` error to order four, then the final error to the claimed
/// order). Results are affine in the free slots.
pub fn derive_conditions(req: &DeriveRequest) -> Result<DerivedConditions, DeriveError> {
    let nf = req.free.len();
    let run = |vals: &[Rational]| {
        let mut b = req.base.clone();
        for (s, v) in req.free.iter().zip(vals) {
            b.set_slot(*s, v);
        }
        derive_once(req, &b)
    };
    let zero = vec![Rational::new(); nf];
    let at_zero = run(&zero)?;
    let mut units = Vec::new();
    for j in 0..nf {
        let mut v = zero.clone();
        v[j] = Rational::from(1);
        units.push(run(&v)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed.wrapping_add(1));
    let probe: Vec<Rational> = (0..nf).map(|_| random_rational(&mut rng)).collect();
    let at_probe = if nf > 0 { Some(run(&probe)?) } else { None };

    let mut values = Vec::new();
    for s in &req.unknowns {
        let derived = match &at_zero[s] {
            None => {
                if units.iter().chain(at_probe.iter()).any(|u| u[s].is_some()) {
                    return Err(DeriveError::FreeNotAffine { slot: s.to_string() });
                }
                Derived::Arbitrary
            }
            Some(c0) => {
                let mut terms = Vec::new();
                for (j, u) in units.iter().enumerate() {
                    let v = u[s].clone().ok_or_else(|| DeriveError::FreeNotAffine { slot: s.to_string() })?;
                    let k = v - c0;
                    if k != 0 {
                        terms.push((req.free[j], k));
                    }
                }
                let affine = Affine { constant: c0.clone(), terms };
                if let Some(p) = &at_probe {
                    let got = p[s].clone().ok_or_else(|| DeriveError::FreeNotAffine { slot: s.to_string() })?;
                    let lookup = |slot: Slot| {
                        req.free.iter().position(|f| *f == slot).map(|i| probe[i].clone()).unwrap_or_default()
                    };
                    if affine.eval(lookup) != got {
                        return Err(DeriveError::FreeNotAffine { slot: s.to_string() });
                    }
                }
                Derived::Value(affine)
            }
        };
        values.push((*s, derived));
    }
    let free: BTreeSet<Slot> = req.free.iter().copied().collect();
    let unknown: BTreeSet<Slot> = req.unknowns.iter().copied().collect();
    let fixed = req.base.slots().into_iter().filter(|(s, _)| !free.contains(s) && !unknown.contains(s)).collect();
    Ok(DerivedConditions { family: req.family, m: req.base.m, values, fixed, free: req.free.clone() })
}

/// Serializable view of a derivation.
#[derive(Clone, Debug, Serialize)]
pub struct DeriveReport {
    pub family: String,
    pub m: u32,
    pub fixed: BTreeMap<String, String>,
    pub free: Vec<String>,
    pub conditions: Vec<(String, String)>,
}

impl From<&DerivedConditions> for DeriveReport {
    fn from(d: &DerivedConditions) -> Self {
        DeriveReport {
            family: d.family.name().into(),
            m: d.m,
            fixed: d.fixed.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect(),
            free: d.free.iter().map(|s| s.to_string()).collect(),
            conditions: d.values.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect(),
        }
    }
}

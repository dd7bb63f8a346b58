//! Single-step maps of every family and the iteration driver.

use rug::{Float, Rational};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::exprs::{self, DomainError, Expr, Oracle, SyntaxError};
use crate::family::{Family, MethodParams};
use crate::scalar::{ratio_power, DomainMode, Scalar, ScalarError};
use crate::series::{observed_order, SeriesError, SymbolBinding};
use crate::weights::{
    a_m, check_conditions, default_weights, BoundWeight, ConditionReport, ConditionSet, Weight1, Weight2,
    WeightError, WeightName, WeightSet,
};

/// The root-finding problem: `f`, `f'`, the multiplicity and the domain.
#[derive(Clone, Debug)]
pub struct Problem {
    pub f: Oracle,
    pub fprime: Oracle,
    pub m: u32,
    pub mode: DomainMode,
    /// Only used to record errors in the trace.
    pub known_root: Option<Scalar>,
}

impl Problem {
    /// `f'` is taken symbolically.
    pub fn new(f: Expr, m: u32, mode: DomainMode) -> Self {
        let fp = exprs::differentiate(&f);
        Self::with_derivative(f, fp, m, mode)
    }

    pub fn with_derivative(f: Expr, fprime: Expr, m: u32, mode: DomainMode) -> Self {
        assert!(m >= 1, "multiplicity must be positive");
        Problem { f: Oracle::new(f), fprime: Oracle::new(fprime), m, mode, known_root: None }
    }

    pub fn parse(text: &str, m: u32, mode: DomainMode) -> Result<Self, SyntaxError> {
        Ok(Self::new(exprs::parse(text)?, m, mode))
    }

    pub fn with_root(mut self, root: Scalar) -> Self {
        self.known_root = Some(root);
        self
    }

    /// Total oracle calls so far (`f` and `f'`).
    pub fn calls(&self) -> u64 {
        self.f.calls() + self.fprime.calls()
    }

    pub fn reset_counters(&self) {
        self.f.reset();
        self.fprime.reset();
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("f'({at}) = 0")]
    ZeroDerivative { at: &'static str },
    #[error("zero denominator in a root ratio")]
    ZeroDenominator,
    #[error("the derivative-ratio family needs m >= 2; it cannot find simple zeros")]
    MultiplicityOne,
    #[error("pole of the rational correction: 1 - R_m t is within the guard of zero")]
    PoleHit,
    #[error("family {family} needs weight {weight:?}")]
    MissingWeight { family: Family, weight: WeightName },
    #[error("family {0} needs parameter R_m")]
    MissingParam(Family),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Eval(#[from] DomainError),
}

impl SolveError {
    pub fn kind(&self) -> &'static str {
        match self {
            SolveError::ZeroDerivative { .. } => "ZeroDerivative",
            SolveError::ZeroDenominator => "ZeroDenominator",
            SolveError::MultiplicityOne => "MultiplicityOne",
            SolveError::PoleHit => "PoleHit",
            SolveError::MissingWeight { .. } => "MissingWeight",
            SolveError::MissingParam(_) => "MissingParam",
            SolveError::Scalar(ScalarError::NegativeEvenRadicand { .. }) => "NegativeEvenRadicand",
            SolveError::Scalar(_) => "ScalarError",
            SolveError::Weight(WeightError::PoleHit { .. }) => "PoleHit",
            SolveError::Weight(_) => "WeightError",
            SolveError::Eval(_) => "EvalDomainError",
        }
    }
}

/// How a configuration's weights were checked against its order claim.
#[derive(Clone, Debug)]
pub enum Verification {
    /// The series oracle observed this order with the bound exact weights.
    Oracle { order: usize },
    /// Declared derivative metadata satisfies the closed-form conditions.
    Conditions(ConditionReport),
    /// Explicitly accepted without a check.
    Unverified,
}

impl Verification {
    pub fn label(&self) -> &'static str {
        match self {
            Verification::Oracle { .. } => "oracle",
            Verification::Conditions(_) => "conditions",
            Verification::Unverified => "unverified",
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum ConfigError {
    #[error("family {family} needs weight {weight:?}")]
    MissingWeight { family: Family, weight: WeightName },
    #[error("weight {0:?} has the wrong arity")]
    WrongArity(WeightName),
    #[error("the derivative-ratio family needs m >= 2; it cannot find simple zeros")]
    MultiplicityOne,
    #[error("family {0} needs parameter R_m (no default is assumed)")]
    MissingParam(Family),
    #[error("weights give observed order {observed}, below the claimed {claimed}")]
    OrderDefect { observed: usize, claimed: u32 },
    #[error("weight conditions fail: {0}")]
    ConditionsFail(String),
    #[error("no closed-form conditions and inexact weights; mark the configuration unverified")]
    CannotVerify,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// A family with its bound weights and scalar parameters.
#[derive(Clone, Debug)]
pub struct MethodConfig {
    pub family: Family,
    pub weights: WeightSet,
    pub params: MethodParams,
    pub verification: Verification,
}

const VERIFY_SEED: u64 = 0x0dd5_eed5;

impl MethodConfig {
    /// The family's default weights, verified for multiplicity `m`.
    pub fn default_for(family: Family, m: u32, params: MethodParams) -> Result<Self, ConfigError> {
        if family == Family::Liu3 && m < 2 {
            return Err(ConfigError::MultiplicityOne);
        }
        let ws = default_weights(family, m, &params)?;
        Self::verified(family, ws, params, m)
    }

    /// Checks the bound weights: by the series oracle when every weight is
    /// exact, else against the closed-form condition set.
    pub fn verified(family: Family, weights: WeightSet, params: MethodParams, m: u32) -> Result<Self, ConfigError> {
        let mut cfg = Self::unverified(family, weights, params)?;
        if family == Family::Liu3 && m < 2 {
            return Err(ConfigError::MultiplicityOne);
        }
        cfg.verification = cfg.verify(m)?;
        Ok(cfg)
    }

    /// Binds weights without checking conditions; required slots must
    /// still be present.
    pub fn unverified(family: Family, weights: WeightSet, params: MethodParams) -> Result<Self, ConfigError> {
        for &w in family.weight_names() {
            match weights.get(&w) {
                None => return Err(ConfigError::MissingWeight { family, weight: w }),
                Some(b) if matches!(b, BoundWeight::Bi(_)) != w.is_bivariate() => {
                    return Err(ConfigError::WrongArity(w))
                }
                _ => {}
            }
        }
        if family == Family::Li22 && params.r_m.is_none() {
            return Err(ConfigError::MissingParam(family));
        }
        Ok(MethodConfig { family, weights, params, verification: Verification::Unverified })
    }

    fn verify(&self, m: u32) -> Result<Verification, ConfigError> {
        let claimed = self.family.claimed_order();
        if self.weights.values().all(|w| w.is_exact()) {
            let mut b = SymbolBinding::new(m, claimed as usize).with_params(self.params.clone());
            b.load_weights(&self.weights)?;
            let observed = observed_order(self.family, &b, 3, VERIFY_SEED)?;
            if observed < claimed as usize {
                return Err(ConfigError::OrderDefect { observed, claimed });
            }
            return Ok(Verification::Oracle { order: observed });
        }
        let cs = ConditionSet::for_family(self.family, &self.params).ok_or(ConfigError::CannotVerify)?;
        let report = check_conditions(&self.weights, &cs, m)?;
        if !report.pass {
            let failed: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("{} = {} (needs {})", c.slot, c.declared, c.required))
                .collect();
            return Err(ConfigError::ConditionsFail(failed.join(", ")));
        }
        Ok(Verification::Conditions(report))
    }

    fn uni(&self, w: WeightName) -> Result<&Weight1, SolveError> {
        self.weights
            .get(&w)
            .and_then(BoundWeight::uni)
            .ok_or(SolveError::MissingWeight { family: self.family, weight: w })
    }

    fn bi(&self, w: WeightName) -> Result<&Weight2, SolveError> {
        self.weights
            .get(&w)
            .and_then(BoundWeight::bi)
            .ok_or(SolveError::MissingWeight { family: self.family, weight: w })
    }
}

/// Everything one step computed.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub x: Scalar,
    pub y: Option<Scalar>,
    pub z: Option<Scalar>,
    pub u: Option<Scalar>,
    pub v: Option<Scalar>,
    pub w: Option<Scalar>,
    pub t: Option<Scalar>,
    /// A weight pole was hit and its cubic Taylor polynomial used instead.
    pub fallback: bool,
}

impl StepOutcome {
    fn new(x: Scalar) -> Self {
        StepOutcome { x, y: None, z: None, u: None, v: None, w: None, t: None, fallback: false }
    }
}

fn q(r: &Rational, prec: u32) -> Scalar {
    Scalar::from_rational(r, prec)
}

fn int(n: i64, prec: u32) -> Scalar {
    Scalar::from_int(n, prec)
}

fn eval_w1(w: &Weight1, s: &Scalar, fallback: &mut bool) -> Result<Scalar, SolveError> {
    match w.eval(s) {
        Ok(v) => Ok(v),
        Err(WeightError::PoleHit { weight, at }) => match w.eval_taylor(s, 3) {
            Some(v) => {
                *fallback = true;
                Ok(v)
            }
            None => Err(WeightError::PoleHit { weight, at }.into()),
        },
        Err(e) => Err(e.into()),
    }
}

/// `f'(x)` and `f(x)/f'(x)`.
fn newton_ratio(p: &Problem, x: &Scalar, fx: &Scalar) -> Result<(Scalar, Scalar), SolveError> {
    let fpx = p.fprime.eval(x)?;
    if fpx.is_zero() {
        return Err(SolveError::ZeroDerivative { at: "x" });
    }
    let newt = fx / &fpx;
    Ok((fpx, newt))
}

/// One iteration from `x` with `f(x)` already known.
///
/// Uses `n` further oracle calls for an `n`-point family: the driver's
/// evaluation of `f` at the new iterate completes the `n + 1` per step.
pub fn step_from(p: &Problem, cfg: &MethodConfig, x: &Scalar, fx: &Scalar) -> Result<StepOutcome, SolveError> {
    use WeightName::*;
    let prec = x.prec();
    let m = p.m;
    let mq = int(m as i64, prec);
    let family = cfg.family;
    if family == Family::Liu3 && m < 2 {
        return Err(SolveError::MultiplicityOne);
    }
    let (fpx, newt) = newton_ratio(p, x, fx)?;
    let mut fb = false;

    if matches!(family, Family::Li22 | Family::Zhou23) {
        let c = int(2 * m as i64, prec) / int(m as i64 + 2, prec);
        let y = x - &(&c * &newt);
        let fpy = p.fprime.eval(&y)?;
        let t = &fpy / &fpx;
        let weight = if family == Family::Li22 {
            let r_m = cfg.params.r_m.as_ref().ok_or(SolveError::MissingParam(family))?;
            let mi = m as i64;
            let a = q(&(Rational::from((mi * (mi - 2), 2)) * a_m(m)), prec);
            let num = &a * &t - q(&Rational::from((mi * mi, 2)), prec);
            let den = int(1, prec) - &(q(r_m, prec) * &t);
            if den.is_zero() || den.abs() <= Float::with_val(prec, Float::i_exp(1, -(prec as i32) / 4)) {
                return Err(SolveError::PoleHit);
            }
            num / den
        } else {
            eval_w1(cfg.uni(Phi)?, &t, &mut fb)?
        };
        let mut out = StepOutcome::new(x - &(&weight * &newt));
        out.y = Some(y);
        out.t = Some(t);
        out.fallback = fb;
        return Ok(out);
    }

    let y = if family == Family::Lee2 {
        let lam = q(&cfg.params.lambda, prec);
        let shifted = fx / &(&fpx + &(&lam * fx));
        x - &(&mq * &shifted)
    } else {
        x - &(&mq * &newt)
    };
    if family == Family::Schroder {
        let mut out = StepOutcome::new(y.clone());
        out.y = Some(y);
        return Ok(out);
    }

    if family == Family::Liu3 {
        let fpy = p.fprime.eval(&y)?;
        let t = ratio_power(&fpy, &fpx, m - 1, p.mode)?;
        let g = eval_w1(cfg.uni(G)?, &t, &mut fb)?;
        let mut out = StepOutcome::new(&y - &(&(&mq * &g) * &newt));
        out.y = Some(y);
        out.t = Some(t);
        out.fallback = fb;
        return Ok(out);
    }

    let fy = p.f.eval(&y)?;
    if fy.is_zero() {
        // u = 0 annihilates every later correction
        let mut out = StepOutcome::new(y.clone());
        out.y = Some(y);
        out.u = Some(Scalar::zero(prec));
        return Ok(out);
    }
    let u = ratio_power(&fy, fx, m, p.mode)?;

    match family {
        Family::TwoPoint18 | Family::Zhou1 | Family::Lee2 => {
            let g = match family {
                Family::TwoPoint18 => &u * &eval_w1(cfg.uni(P)?, &u, &mut fb)?,
                Family::Zhou1 => eval_w1(cfg.uni(G)?, &u, &mut fb)?,
                _ => eval_w1(cfg.uni(W)?, &u, &mut fb)?,
            };
            let corr_base = if family == Family::Lee2 {
                let lam2 = q(&Rational::from(&cfg.params.lambda * 2u32), prec);
                fx / &(&fpx + &(&lam2 * fx))
            } else {
                newt.clone()
            };
            let mut out = StepOutcome::new(&y - &(&(&mq * &g) * &corr_base));
            out.y = Some(y);
            out.u = Some(u);
            out.fallback = fb;
            Ok(out)
        }
        Family::PQ12 | Family::Behl4 | Family::Hpgl15b | Family::Mod7b => {
            let h = if family == Family::Behl4 {
                let (a1, a2) = (q(&cfg.params.a1, prec), q(&cfg.params.a2, prec));
                let den = &a1 + &(&a2 * &u);
                if den.is_zero() {
                    return Err(SolveError::ZeroDenominator);
                }
                Some(&u / &den)
            } else {
                None
            };
            let zc = match family {
                Family::PQ12 => &u * &(eval_w1(cfg.uni(P)?, &u, &mut fb)? * &mq),
                Family::Behl4 => &u * &eval_w1(cfg.uni(S)?, h.as_ref().unwrap(), &mut fb)?,
                _ => &(&u * &eval_w1(cfg.uni(H)?, &u, &mut fb)?) * &mq,
            };
            let z = &y - &(&zc * &newt);
            let fz = p.f.eval(&z)?;
            if fz.is_zero() {
                let mut out = StepOutcome::new(z.clone());
                out.y = Some(y);
                out.z = Some(z);
                out.v = Some(Scalar::zero(prec));
                out.w = Some(Scalar::zero(prec));
                out.u = Some(u);
                out.fallback = fb;
                return Ok(out);
            }
            let v = ratio_power(&fz, &fy, m, p.mode)?;
            let uv = &u * &v;
            let xc = match family {
                Family::PQ12 => &uv * &(cfg.bi(Q)?.eval(&u, &v)? * &mq),
                Family::Behl4 => &uv * &cfg.bi(R)?.eval(h.as_ref().unwrap(), &v)?,
                Family::Hpgl15b => {
                    let pu = eval_w1(cfg.uni(P)?, &u, &mut fb)?;
                    let gv = eval_w1(cfg.uni(G)?, &v, &mut fb)?;
                    let lw = eval_w1(cfg.uni(L)?, &uv, &mut fb)?;
                    &(&(&(&u * &pu) * &gv) * &lw) * &mq
                }
                _ => {
                    let pu = eval_w1(cfg.uni(P)?, &u, &mut fb)?;
                    let gv = eval_w1(cfg.uni(G)?, &v, &mut fb)?;
                    let factor = int(1, prec) + &(int(2, prec) * &uv);
                    &(&(&(&uv * &factor) * &pu) * &gv) * &mq
                }
            };
            let mut out = StepOutcome::new(&z - &(&xc * &newt));
            out.y = Some(y);
            out.z = Some(z);
            out.u = Some(u);
            out.v = Some(v);
            out.w = Some(uv);
            out.fallback = fb;
            Ok(out)
        }
        _ => unreachable!("handled above"),
    }
}

fn bare(family: Family, weights: &[(WeightName, BoundWeight)], params: MethodParams) -> MethodConfig {
    MethodConfig { family, weights: weights.iter().cloned().collect(), params, verification: Verification::Unverified }
}

fn one_step(p: &Problem, cfg: &MethodConfig, x: &Scalar) -> Result<Scalar, SolveError> {
    let fx = p.f.eval(x)?;
    if fx.is_zero() {
        return Ok(x.clone());
    }
    Ok(step_from(p, cfg, x, &fx)?.x)
}

/// `x - m f(x)/f'(x)`.
pub fn schroder_step(p: &Problem, x: &Scalar) -> Result<Scalar, SolveError> {
    one_step(p, &bare(Family::Schroder, &[], MethodParams::default()), x)
}

/// `y - m u P(u) f/f'` with `u = (f(y)/f(x))^{1/m}`.
pub fn step_two_point(p: &Problem, x: &Scalar, pw: &Weight1) -> Result<Scalar, SolveError> {
    let cfg = bare(Family::TwoPoint18, &[(WeightName::P, BoundWeight::Uni(pw.clone()))], MethodParams::default());
    one_step(p, &cfg, x)
}

/// `y - m G(t) f/f'` with `t = (f'(y)/f'(x))^{1/(m-1)}`.
pub fn step_liu(p: &Problem, x: &Scalar, g: &Weight1) -> Result<Scalar, SolveError> {
    let cfg = bare(Family::Liu3, &[(WeightName::G, BoundWeight::Uni(g.clone()))], MethodParams::default());
    one_step(p, &cfg, x)
}

pub fn step_three_point_pq(p: &Problem, x: &Scalar, pw: &Weight1, qw: &Weight2) -> Result<Scalar, SolveError> {
    let cfg = bare(
        Family::PQ12,
        &[(WeightName::P, BoundWeight::Uni(pw.clone())), (WeightName::Q, BoundWeight::Bi(qw.clone()))],
        MethodParams::default(),
    );
    one_step(p, &cfg, x)
}

pub fn step_three_point_hpgl(
    p: &Problem,
    x: &Scalar,
    h: &Weight1,
    pw: &Weight1,
    g: &Weight1,
    l: &Weight1,
) -> Result<Scalar, SolveError> {
    use WeightName::*;
    let ws = [(H, h), (P, pw), (G, g), (L, l)].map(|(n, w)| (n, BoundWeight::Uni(w.clone())));
    one_step(p, &bare(Family::Hpgl15b, &ws, MethodParams::default()), x)
}

pub fn step_7b(p: &Problem, x: &Scalar, h: &Weight1, pw: &Weight1, g: &Weight1) -> Result<Scalar, SolveError> {
    use WeightName::*;
    let ws = [(H, h), (P, pw), (G, g)].map(|(n, w)| (n, BoundWeight::Uni(w.clone())));
    one_step(p, &bare(Family::Mod7b, &ws, MethodParams::default()), x)
}

pub fn step_li22(p: &Problem, x: &Scalar, r_m: &Rational) -> Result<Scalar, SolveError> {
    let params = MethodParams { r_m: Some(r_m.clone()), ..MethodParams::default() };
    one_step(p, &bare(Family::Li22, &[], params), x)
}

pub fn step_zhou23(p: &Problem, x: &Scalar, phi: &Weight1) -> Result<Scalar, SolveError> {
    let cfg = bare(Family::Zhou23, &[(WeightName::Phi, BoundWeight::Uni(phi.clone()))], MethodParams::default());
    one_step(p, &cfg, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    ResidualTol,
    StepTol,
    MaxIter,
    ExactZero,
    Diverged,
    DomainError,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::ResidualTol | StopReason::StepTol | StopReason::ExactZero)
    }
}

#[derive(Clone, Debug)]
pub struct IterRecord {
    pub x: Scalar,
    pub fx: Scalar,
    pub y: Option<Scalar>,
    pub z: Option<Scalar>,
    pub u: Option<Scalar>,
    pub v: Option<Scalar>,
    pub w: Option<Scalar>,
    pub t: Option<Scalar>,
    pub x_next: Scalar,
    pub fx_next: Scalar,
    /// `|x_next - α|` when the root is known.
    pub error: Option<Float>,
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub family: Family,
    pub x0: Scalar,
    pub fx0: Option<Scalar>,
    pub error0: Option<Float>,
    pub records: Vec<IterRecord>,
    pub stop_reason: StopReason,
    /// Where and why a `DomainError` or `Diverged` stop happened.
    pub detail: Option<String>,
    /// Oracle calls made by this solve.
    pub evaluations: u64,
}

impl Trace {
    pub fn final_x(&self) -> &Scalar {
        self.records.last().map(|r| &r.x_next).unwrap_or(&self.x0)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `x_0, x_1, …`.
    pub fn iterates(&self) -> Vec<&Scalar> {
        std::iter::once(&self.x0).chain(self.records.iter().map(|r| &r.x_next)).collect()
    }

    /// `|x_k - α|` for every iterate, when the root was known.
    pub fn errors(&self) -> Option<Vec<Float>> {
        let mut out = vec![self.error0.clone()?];
        for r in &self.records {
            out.push(r.error.clone()?);
        }
        Some(out)
    }

    pub fn final_residual(&self) -> Option<Float> {
        match self.records.last() {
            Some(r) => Some(r.fx_next.abs()),
            None => self.fx0.as_ref().map(Scalar::abs),
        }
    }

    pub fn to_json(&self, digits: usize) -> Value {
        let s = |v: &Option<Scalar>| v.as_ref().map(|x| x.to_string_digits(digits));
        let e = |v: &Option<Float>| v.as_ref().map(|x| x.to_string_radix(10, Some(12)));
        let records: Vec<Value> = self
            .records
            .iter()
            .map(|r| {
                json!({
                    "x": r.x.to_string_digits(digits),
                    "fx": r.fx.to_string_digits(digits),
                    "y": s(&r.y), "z": s(&r.z), "u": s(&r.u), "v": s(&r.v), "w": s(&r.w), "t": s(&r.t),
                    "x_next": r.x_next.to_string_digits(digits),
                    "error": e(&r.error),
                    "taylor_fallback": r.fallback,
                })
            })
            .collect();
        json!({
            "family": self.family.name(),
            "x0": self.x0.to_string_digits(digits),
            "error0": e(&self.error0),
            "iterations": self.records.len(),
            "records": records,
            "stop_reason": self.stop_reason,
            "detail": self.detail,
            "evaluations": self.evaluations,
            "final_x": self.final_x().to_string_digits(digits),
            "final_residual": e(&self.final_residual()),
        })
    }
}

/// Factor beyond which a residual increase counts toward divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Iterates until `|f(x_k)| <= tol |f(x_0)|`, `|x_{k+1} - x_k| <= tol`,
/// an exact zero, `max_iter` steps, divergence, or a domain error.
pub fn solve(p: &Problem, cfg: &MethodConfig, x0: &Scalar, tol: &Float, max_iter: usize) -> Trace {
    assert!(max_iter >= 1, "max_iter must be positive");
    assert!(*tol > 0, "tolerance must be positive");
    let start = p.calls();
    let err_of = |x: &Scalar| p.known_root.as_ref().map(|a| (x - a).abs());
    let mut trace = Trace {
        family: cfg.family,
        x0: x0.clone(),
        fx0: None,
        error0: err_of(x0),
        records: Vec::new(),
        stop_reason: StopReason::MaxIter,
        detail: None,
        evaluations: 0,
    };
    let finish = |mut trace: Trace, reason: StopReason, detail: Option<String>| {
        trace.stop_reason = reason;
        trace.detail = detail;
        trace.evaluations = p.calls() - start;
        trace
    };
    let fx0 = match p.f.eval(x0) {
        Ok(v) => v,
        Err(e) => return finish(trace, StopReason::DomainError, Some(format!("f(x0): {e}"))),
    };
    trace.fx0 = Some(fx0.clone());
    if fx0.is_zero() {
        return finish(trace, StopReason::ExactZero, None);
    }
    let scale = fx0.abs();
    let big = Float::with_val(x0.prec(), DIVERGENCE_FACTOR);
    let mut x = x0.clone();
    let mut fx = fx0;
    let mut growth = 0;
    for k in 0..max_iter {
        let out = match step_from(p, cfg, &x, &fx) {
            Ok(o) => o,
            Err(SolveError::Scalar(ScalarError::Underflow)) => {
                return finish(trace, StopReason::StepTol, Some(format!("step {k}: precision underflow")))
            }
            Err(SolveError::ZeroDenominator) if fx.is_zero() => return finish(trace, StopReason::ExactZero, None),
            Err(e) => return finish(trace, StopReason::DomainError, Some(format!("step {k} ({}): {e}", e.kind()))),
        };
        let x_next = out.x;
        let fx_next = match p.f.eval(&x_next) {
            Ok(v) => v,
            Err(e) => return finish(trace, StopReason::DomainError, Some(format!("step {k} f(x_next): {e}"))),
        };
        let dx = (&x_next - &x).abs();
        let r_next = fx_next.abs();
        let r_prev = fx.abs();
        trace.records.push(IterRecord {
            x: x.clone(),
            fx: fx.clone(),
            y: out.y,
            z: out.z,
            u: out.u,
            v: out.v,
            w: out.w,
            t: out.t,
            error: err_of(&x_next),
            x_next: x_next.clone(),
            fx_next: fx_next.clone(),
            fallback: out.fallback,
        });
        if fx_next.is_zero() {
            return finish(trace, StopReason::ExactZero, None);
        }
        if !x_next.is_finite() || !fx_next.is_finite() {
            return finish(trace, StopReason::Diverged, Some(format!("step {k}: non-finite iterate")));
        }
        if r_next <= Float::with_val(x0.prec(), &scale * tol) {
            return finish(trace, StopReason::ResidualTol, None);
        }
        if dx <= *tol {
            return finish(trace, StopReason::StepTol, None);
        }
        if r_next > Float::with_val(x0.prec(), &r_prev * &big) {
            growth += 1;
            if growth >= 2 {
                return finish(trace, StopReason::Diverged, Some(format!("step {k}: residual grew twice by 1e6")));
            }
        } else {
            growth = 0;
        }
        x = x_next;
        fx = fx_next;
    }
    finish(trace, StopReason::MaxIter, None)
}

/// `2^{-bits}` at `prec` bits.
pub fn tol_bits(bits: i32, prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, -bits))
}

/// Default tolerance: `2^{-(9/10) prec}`.
pub fn default_tol(prec: u32) -> Float {
    tol_bits((prec as i32 * 9) / 10, prec)
}

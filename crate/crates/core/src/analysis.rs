//! Computational order of convergence over a test corpus, and the
//! evaluation-count view of optimality.

use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;
use thiserror::Error;

use crate::exprs::{self, Expr};
use crate::family::{Family, MethodParams};
use crate::scalar::{DomainMode, Scalar, ScalarError};
use crate::series::{expand_family, first_nonzero, SymbolBinding};
use crate::solvers::{default_tol, solve, MethodConfig, Problem, StopReason, Trace, Verification};
use crate::weights::a_m;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need three consecutive errors above the precision floor, found {usable}")]
    InsufficientData { usable: usize },
    #[error("trace has no known root")]
    NoRoot,
    #[error("bad corpus entry `{name}`: {reason}")]
    BadEntry { name: String, reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct CocReport {
    /// `(k, ρ_k)` for every usable triple `e_{k-1}, e_k, e_{k+1}`.
    pub estimates: Vec<(usize, f64)>,
    pub final_estimate: f64,
    pub steps_used: usize,
}

/// Errors at or below `2^{-(prec - 32)}` relative to `max(1, |α|)` carry
/// too few correct bits for a log ratio.
pub fn precision_floor(prec: u32, alpha_abs: &Float) -> Float {
    let scale = Float::with_val(prec, alpha_abs).max(&Float::with_val(prec, 1));
    scale * Float::with_val(prec, Float::i_exp(1, -(prec as i32 - 32)))
}

fn ln_ratio(a: &Float, b: &Float) -> f64 {
    Float::with_val(a.prec(), a / b).ln().to_f64()
}

/// `ρ_k` from a sequence of magnitudes, using only entries in `(floor, 1)`.
pub fn order_estimates(values: &[Float], floor: &Float) -> Result<CocReport, AnalysisError> {
    let usable = |e: &Float| *e > *floor && *e < 1;
    let mut estimates = Vec::new();
    for k in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (&values[k - 1], &values[k], &values[k + 1]);
        if usable(a) && usable(b) && usable(c) {
            estimates.push((k, ln_ratio(c, b) / ln_ratio(b, a)));
        }
    }
    match estimates.last() {
        Some(&(_, last)) => {
            let steps_used = values.iter().filter(|e| usable(e)).count();
            Ok(CocReport { final_estimate: last, estimates, steps_used })
        }
        None => Err(AnalysisError::InsufficientData { usable: values.iter().filter(|e| usable(e)).count() }),
    }
}

/// `ρ_k = ln(|e_{k+1}|/|e_k|) / ln(|e_k|/|e_{k-1}|)` with `e_k = x_k - α`.
pub fn coc_estimate(t: &Trace, alpha: &Scalar) -> Result<CocReport, AnalysisError> {
    let errors: Vec<Float> = t.iterates().iter().map(|x| (*x - alpha).abs()).collect();
    let floor = precision_floor(t.x0.prec(), &alpha.abs());
    order_estimates(&errors, &floor)
}

/// Root-free variant on successive differences `d_k = x_k - x_{k-1}`.
pub fn acoc_estimate(t: &Trace) -> Result<CocReport, AnalysisError> {
    let xs = t.iterates();
    let diffs: Vec<Float> = xs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let scale = xs.last().map(|x| x.abs()).unwrap_or_else(|| Float::with_val(t.x0.prec(), 1));
    let floor = precision_floor(t.x0.prec(), &scale);
    order_estimates(&diffs, &floor)
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusEntry {
    pub name: String,
    /// Expression text in the function grammar.
    pub f: String,
    /// Root as a real or complex literal.
    pub root: String,
    pub m: u32,
    pub x0: String,
    pub mode: DomainMode,
    /// `C_1, C_2, …` of the error expansion when they are rational.
    #[serde(skip)]
    pub c: Option<Vec<Rational>>,
}

impl CorpusEntry {
    pub fn new(name: &str, f: &str, root: &str, m: u32, x0: &str, mode: DomainMode) -> Self {
        CorpusEntry { name: name.into(), f: f.into(), root: root.into(), m, x0: x0.into(), mode, c: None }
    }

    pub fn with_c(mut self, c: Vec<Rational>) -> Self {
        self.c = Some(c);
        self
    }

    /// `C_r = m!/(m+r)! f^{(m+r)}(α)/f^{(m)}(α)` for `r = 1..=n`, numerically.
    pub fn c_numeric(&self, n: usize, prec: u32) -> Result<Vec<Scalar>, AnalysisError> {
        let alpha = self.root_at(prec)?;
        let mut e = self.expr()?;
        let mut derivs = Vec::new();
        for _ in 0..=(self.m as usize + n) {
            derivs.push(exprs::evaluate(&e, &alpha).map_err(|err| self.bad(err))?);
            e = exprs::differentiate(&e);
        }
        let m = self.m as usize;
        let mut out = Vec::new();
        let mut ratio = Scalar::one(prec);
        for r in 1..=n {
            ratio = ratio / Scalar::from_int((m + r) as i64, prec);
            out.push(&ratio * &(&derivs[m + r] / &derivs[m]));
        }
        Ok(out)
    }

    fn bad(&self, reason: impl ToString) -> AnalysisError {
        AnalysisError::BadEntry { name: self.name.clone(), reason: reason.to_string() }
    }

    pub fn expr(&self) -> Result<Expr, AnalysisError> {
        exprs::parse(&self.f).map_err(|e| self.bad(e))
    }

    pub fn root_at(&self, prec: u32) -> Result<Scalar, AnalysisError> {
        Scalar::parse(&self.root, prec).map_err(|e: ScalarError| self.bad(e))
    }

    pub fn x0_at(&self, prec: u32) -> Result<Scalar, AnalysisError> {
        Scalar::parse(&self.x0, prec).map_err(|e: ScalarError| self.bad(e))
    }

    pub fn problem(&self, prec: u32) -> Result<Problem, AnalysisError> {
        Ok(Problem::new(self.expr()?, self.m, self.mode).with_root(self.root_at(prec)?))
    }

    /// `f^{(k)}(α)` vanishes for `k < m` and not for `k = m`, using symbolic
    /// derivatives evaluated at `prec` bits.
    pub fn check_multiplicity(&self, prec: u32) -> Result<bool, AnalysisError> {
        let alpha = self.root_at(prec)?;
        let tiny = Float::with_val(prec, Float::i_exp(1, -(prec as i32 * 3) / 4));
        let mut e = self.expr()?;
        for k in 0..=self.m {
            let v = exprs::evaluate(&e, &alpha).map_err(|err| self.bad(err))?.abs();
            let vanishes = v <= tiny;
            if vanishes != (k < self.m) {
                return Ok(false);
            }
            e = exprs::differentiate(&e);
        }
        Ok(true)
    }
}

/// The default test corpus.
pub fn corpus_default() -> Vec<CorpusEntry> {
    use DomainMode::*;
    // f = (x - α)^m g(x) gives C_r = g^{(r)}(α) / (r! g(α))
    let n = C_TERMS;
    let mut fact = Rational::from(1);
    let exp_c: Vec<Rational> = (1..=n as u32)
        .map(|r| {
            fact *= r;
            fact.clone().recip()
        })
        .collect();
    let linear_c = |g0: i64| {
        let mut c = vec![Rational::from((1, g0))];
        c.resize(n, Rational::new());
        c
    };
    let mut out = Vec::new();
    for m in [2, 3, 5] {
        out.push(
            CorpusEntry::new(&format!("exp_m{m}"), &format!("(x-1)^{m}*exp(x)"), "1", m, "1.1", RealSignPreserving)
                .with_c(exp_c.clone()),
        );
    }
    for m in [2, 4] {
        out.push(
            CorpusEntry::new(&format!("poly_m{m}"), &format!("(x-2)^{m}*(x+3)"), "2", m, "2.1", RealSignPreserving)
                .with_c(linear_c(5)),
        );
    }
    for m in [2, 3] {
        out.push(CorpusEntry::new(&format!("complex_m{m}"), &format!("(x^2+1)^{m}"), "i", m, "0.1+1.1i", ComplexPrincipal));
    }
    out.push(CorpusEntry::new("simple", "x^2-4", "2", 1, "2.1", RealSignPreserving).with_c(linear_c(4)));
    out
}

/// Number of `C_r` carried by corpus entries.
pub const C_TERMS: usize = 12;

/// Truncation for entry-specific order checks; orders above it read as
/// `EXACT_ORDER_CAP + 1`.
pub const EXACT_ORDER_CAP: usize = 11;

/// Exact order of the family's default configuration on an entry: the first
/// nonzero error coefficient with the entry's own `C_r`, or the family's
/// claimed order when those are not rational.
pub fn entry_order(cfg: &MethodConfig, entry: &CorpusEntry) -> u32 {
    let claimed = cfg.family.claimed_order();
    let Some(c) = &entry.c else { return claimed };
    let mut b = SymbolBinding::new(entry.m, EXACT_ORDER_CAP).with_params(cfg.params.clone()).with_c(c.clone());
    if b.load_weights(&cfg.weights).is_err() {
        return claimed;
    }
    match expand_family(cfg.family, &b) {
        Ok(s) => first_nonzero(&s) as u32,
        Err(_) => claimed,
    }
}

/// Steps at which a computed root ratio left the branch the error
/// expansion assumes: `u ≈ e_y/e_x`, `v ≈ e_z/e_y`, and for the
/// derivative-ratio family `t ≈ e_y/e_x`. A ratio counts as off-branch when
/// it differs from its error-ratio proxy by more than half the proxy.
pub fn branch_mismatches(t: &Trace, alpha: &Scalar) -> usize {
    let off = |computed: &Option<Scalar>, num: &Scalar, den: &Scalar| -> bool {
        let Some(c) = computed else { return false };
        let (en, ed) = (num - alpha, den - alpha);
        if ed.is_zero() || en.is_zero() || c.is_zero() {
            return false;
        }
        let proxy = &en / &ed;
        (c / &proxy - Scalar::one(c.prec())).abs() > 0.5
    };
    let floor = precision_floor(t.x0.prec(), &alpha.abs());
    t.records
        .iter()
        .filter(|r| (&r.x - alpha).abs() > floor)
        .filter(|r| {
            let Some(y) = &r.y else { return false };
            let ratio = if t.family == Family::Liu3 { &r.t } else { &r.u };
            let u_off = t.family != Family::Li22 && t.family != Family::Zhou23 && off(ratio, y, &r.x);
            let v_off = match &r.z {
                Some(z) => off(&r.v, z, y),
                None => false,
            };
            u_off || v_off
        })
        .count()
}

/// Parameters the corpus uses for a family at multiplicity `m`; the
/// rational root-free step takes `R_m = A_m`, the value that makes its
/// correction equal `m` at `t*`.
pub fn corpus_params(family: Family, m: u32) -> MethodParams {
    let mut p = MethodParams::default();
    if family == Family::Li22 {
        p.r_m = Some(a_m(m));
    }
    p
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalityReport {
    pub family: String,
    pub points: u32,
    pub evals_per_iteration: u32,
    pub order: u32,
    pub optimal: bool,
}

/// `n`-point, `n + 1` evaluations and order `2^n`.
pub fn optimality_report(cfg: &MethodConfig) -> OptimalityReport {
    let family = cfg.family;
    let order = match cfg.verification {
        Verification::Oracle { order } => (order as u32).min(family.claimed_order()),
        _ => family.claimed_order(),
    };
    let n = family.points();
    let evals = family.evals_per_iteration();
    OptimalityReport {
        family: family.name().into(),
        points: n,
        evals_per_iteration: evals,
        order,
        optimal: evals == n + 1 && order == 1 << n,
    }
}

/// Oracle calls per iteration over `iters` steps, not counting the one
/// evaluation of `f(x_0)`.
pub fn measured_evals_per_iteration(
    entry: &CorpusEntry,
    cfg: &MethodConfig,
    prec: u32,
    iters: usize,
) -> Result<f64, AnalysisError> {
    let p = entry.problem(prec)?;
    let tr = solve(&p, cfg, &entry.x0_at(prec)?, &default_tol(prec), iters);
    if tr.iterations() == 0 {
        return Err(AnalysisError::InsufficientData { usable: 0 });
    }
    Ok((tr.evaluations - 1) as f64 / tr.iterations() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusRow {
    pub family: String,
    pub entry: String,
    pub m: u32,
    pub stop_reason: Option<StopReason>,
    pub iterations: usize,
    pub final_residual: Option<String>,
    pub coc: Option<f64>,
    pub expected_order: u32,
    pub coc_pass: bool,
    /// Steps where an m-th root of a ratio took a different branch from
    /// the one the error expansion assumes.
    pub branch_mismatches: usize,
    pub optimal_flag: bool,
    /// Rejections and estimator failures.
    pub note: Option<String>,
}

/// Runs one family on one entry and estimates its order.
pub fn corpus_run(family: Family, entry: &CorpusEntry, prec: u32, max_iter: usize) -> CorpusRow {
    let mut row = CorpusRow {
        family: family.name().into(),
        entry: entry.name.clone(),
        m: entry.m,
        stop_reason: None,
        iterations: 0,
        final_residual: None,
        coc: None,
        expected_order: family.claimed_order(),
        coc_pass: false,
        branch_mismatches: 0,
        optimal_flag: false,
        note: None,
    };
    let cfg = match MethodConfig::default_for(family, entry.m, corpus_params(family, entry.m)) {
        Ok(c) => c,
        Err(e) => {
            row.note = Some(format!("rejected: {e}"));
            return row;
        }
    };
    row.optimal_flag = optimality_report(&cfg).optimal;
    row.expected_order = entry_order(&cfg, entry);
    let run = || -> Result<(Trace, Scalar), AnalysisError> {
        let p = entry.problem(prec)?;
        let alpha = entry.root_at(prec)?;
        Ok((solve(&p, &cfg, &entry.x0_at(prec)?, &default_tol(prec), max_iter), alpha))
    };
    match run() {
        Ok((tr, alpha)) => {
            row.stop_reason = Some(tr.stop_reason);
            row.iterations = tr.iterations();
            row.final_residual = tr.final_residual().map(|r| r.to_string_radix(10, Some(6)));
            row.branch_mismatches = branch_mismatches(&tr, &alpha);
            match coc_estimate(&tr, &alpha) {
                Ok(c) => {
                    row.coc = Some(c.final_estimate);
                    row.coc_pass = (c.final_estimate - row.expected_order as f64).abs() <= COC_WINDOW;
                }
                Err(e) => row.note = Some(e.to_string()),
            }
            if let Some(d) = tr.detail {
                row.note = Some(d);
            }
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

/// Half-width of the acceptance window around the exact order.
pub const COC_WINDOW: f64 = 0.5;

/// Every `(family, entry)` pair, in parallel; rows come back in
/// family-major order regardless of scheduling.
pub fn corpus_sweep(families: &[Family], entries: &[CorpusEntry], prec: u32, max_iter: usize) -> Vec<CorpusRow> {
    let pairs: Vec<(Family, &CorpusEntry)> =
        families.iter().flat_map(|&f| entries.iter().map(move |e| (f, e))).collect();
    pairs.par_iter().map(|(f, e)| corpus_run(*f, e, prec, max_iter)).collect()
}

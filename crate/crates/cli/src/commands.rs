use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use mzero::analysis::{coc_estimate, corpus_default, corpus_params, corpus_sweep, CorpusEntry, CorpusRow};
use mzero::bench::{self, BenchRecord};
use mzero::exprs;
use mzero::scalar::{parse_decimal_rational, Scalar, COC_PRECISION, DEFAULT_PRECISION};
use mzero::series::{condition_binding, derive_conditions, order_report, DeriveReport, DeriveRequest, OrderReport};
use mzero::solvers::{default_tol, solve, ConfigError, MethodConfig, Problem, StopReason};
use mzero::weights::{builtin, builtin2, default_weights, t_star, BoundWeight, ParamMap, Slot, Weight1, WeightName};
use mzero::{DomainMode, Family, MethodParams};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::Rational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{BenchCmd, BenchMode, Cli, Cmd, CorpusCmd, DeriveArgs, Format, ModeArg, SolveArgs, VerifyArgs};
use crate::Failure;

/// Bumped whenever a JSON report changes shape.
pub const SCHEMA_VERSION: u32 = 1;

struct Sink {
    format: Format,
    path: Option<PathBuf>,
}

impl Sink {
    fn write(&self, text: &str) -> Result<(), Failure> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json(&self, schema: &str, mut body: Value) -> Result<(), Failure> {
        let obj = body.as_object_mut().expect("reports are JSON objects");
        obj.insert("schema".into(), json!(format!("mzero.{schema}")));
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        let mut text = serde_json::to_string_pretty(&body).expect("serializable");
        text.push('\n');
        self.write(&text)
    }
}

fn csv_text<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Failure::domain(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn dispatch(cli: Cli) -> Result<u8, Failure> {
    if let Some(p) = cli.prec {
        if !(16..=1 << 20).contains(&p) {
            return Err(Failure::usage(format!("--prec {p} outside 16..=1048576")));
        }
    }
    let sink = |default| Sink { format: cli.out.unwrap_or(default), path: cli.output.clone() };
    let prec = cli.prec.unwrap_or(DEFAULT_PRECISION);
    match cli.cmd {
        Cmd::Solve(a) => cmd_solve(a, prec, &sink(Format::Text)),
        Cmd::VerifyOrder(a) => cmd_verify_order(a, cli.seed, &sink(Format::Text)),
        Cmd::DeriveConditions(a) => cmd_derive_conditions(a, cli.seed, &sink(Format::Text)),
        Cmd::Bench(b) => cmd_bench(b, cli.seed, &sink(Format::Csv)),
        Cmd::Corpus(c) => cmd_corpus(c, cli.prec.unwrap_or(COC_PRECISION), &sink(Format::Text)),
    }
}

// ---- argument parsing ----

fn parse_family(s: &str) -> Result<Family, Failure> {
    s.parse().map_err(Failure::usage)
}

/// `p/q` or a terminating decimal.
fn parse_rational(text: &str) -> Result<Rational, Failure> {
    let t = text.trim();
    let bad = || Failure::usage(format!("`{text}` is not a rational number"));
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_decimal_rational(n.trim()).ok_or_else(bad)?;
        let d = parse_decimal_rational(d.trim()).ok_or_else(bad)?;
        if d == 0 {
            return Err(Failure::usage(format!("`{text}` has a zero denominator")));
        }
        return Ok(n / d);
    }
    parse_decimal_rational(t).ok_or_else(bad)
}

fn split_kv(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Failure::usage(format!("expected KEY=VALUE, got `{s}`")))
}

fn apply_params(base: &mut MethodParams, list: &[String]) -> Result<(), Failure> {
    for item in list {
        let (k, v) = split_kv(item)?;
        let v = parse_rational(v)?;
        match k.to_ascii_lowercase().as_str() {
            "lambda" => base.lambda = v,
            "a1" => base.a1 = v,
            "a2" => base.a2 = v,
            "r_m" | "rm" => base.r_m = Some(v),
            _ => return Err(Failure::usage(format!("unknown parameter `{k}` (lambda, a1, a2, r_m)"))),
        }
    }
    Ok(())
}

fn parse_slot_value(family: Family, s: &str) -> Result<(Slot, Rational), Failure> {
    let (k, v) = split_kv(s)?;
    let slot: Slot = k.parse().map_err(|e: mzero::weights::WeightError| Failure::usage(e.to_string()))?;
    if !family.weight_names().contains(&slot.weight()) {
        return Err(Failure::usage(format!("{} has no weight {}", family.name(), slot.weight())));
    }
    Ok((slot, parse_rational(v)?))
}

/// `SLOT=NAME(k=v,...)` or `SLOT=expr:TEXT`.
fn parse_weight(spec: &str, m: u32) -> Result<(WeightName, BoundWeight), Failure> {
    let (slot, rhs) = split_kv(spec)?;
    let name: WeightName = slot.parse().map_err(|e: mzero::weights::WeightError| Failure::usage(e.to_string()))?;
    let werr = |e: mzero::weights::WeightError| Failure::usage(format!("--weight {spec}: {e}"));
    if let Some(text) = rhs.strip_prefix("expr:") {
        if name.is_bivariate() {
            return Err(Failure::usage(format!("--weight {spec}: expression weights are univariate")));
        }
        let expr = exprs::parse(text).map_err(|e| Failure::usage(format!("--weight {spec}: {e}")))?;
        let center = if name == WeightName::Phi { t_star(m) } else { Rational::new() };
        return Ok((name, BoundWeight::Uni(Weight1::custom(expr, center).map_err(werr)?)));
    }
    let (wname, inner) = match rhs.find('(') {
        Some(i) => {
            let inner = rhs[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Failure::usage(format!("--weight {spec}: missing `)`")))?;
            (&rhs[..i], inner)
        }
        None => (rhs, ""),
    };
    let mut pm = ParamMap::new();
    for kv in inner.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = split_kv(kv)?;
        pm.insert(k.to_string(), parse_rational(v)?);
    }
    let w = if name.is_bivariate() {
        BoundWeight::Bi(builtin2(wname.trim(), &pm).map_err(werr)?)
    } else {
        BoundWeight::Uni(builtin(wname.trim(), &pm).map_err(werr)?)
    };
    Ok((name, w))
}

fn config_failure(e: ConfigError) -> Failure {
    Failure::usage(e.to_string())
}

fn build_config(
    family: Family,
    m: u32,
    params: MethodParams,
    weights: &[String],
    unverified: bool,
) -> Result<MethodConfig, Failure> {
    if family == Family::Liu3 && m < 2 {
        return Err(config_failure(ConfigError::MultiplicityOne));
    }
    if weights.is_empty() && !unverified {
        return MethodConfig::default_for(family, m, params).map_err(config_failure);
    }
    let mut ws = default_weights(family, m, &params).map_err(|e| Failure::usage(e.to_string()))?;
    for spec in weights {
        let (name, w) = parse_weight(spec, m)?;
        if !family.weight_names().contains(&name) {
            return Err(Failure::usage(format!("{} has no weight {name}", family.name())));
        }
        ws.insert(name, w);
    }
    if unverified {
        MethodConfig::unverified(family, ws, params).map_err(config_failure)
    } else {
        MethodConfig::verified(family, ws, params, m).map_err(config_failure)
    }
}

// ---- solve ----

fn cmd_solve(a: SolveArgs, prec: u32, sink: &Sink) -> Result<u8, Failure> {
    let family = parse_family(&a.family)?;
    if a.m == 0 {
        return Err(Failure::usage("--m must be at least 1"));
    }
    if a.max_iter == 0 {
        return Err(Failure::usage("--max-iter must be at least 1"));
    }
    let mode = match a.mode {
        ModeArg::Real => DomainMode::RealSignPreserving,
        ModeArg::Complex => DomainMode::ComplexPrincipal,
    };
    let f = exprs::parse(&a.function).map_err(|e| Failure::usage(format!("--fn: {e}")))?;
    let mut p = match &a.deriv {
        Some(d) => {
            let fp = exprs::parse(d).map_err(|e| Failure::usage(format!("--deriv: {e}")))?;
            Problem::with_derivative(f, fp, a.m, mode)
        }
        None => Problem::new(f, a.m, mode),
    };
    let mut params = MethodParams::default();
    apply_params(&mut params, &a.params)?;
    let cfg = build_config(family, a.m, params, &a.weights, a.unverified)?;

    let num = |flag: &str, text: &str| {
        let parsed = if a.exact && flag == "--x0" { Scalar::parse_exact(text, prec) } else { Scalar::parse(text, prec) };
        parsed.map_err(|e| Failure::usage(format!("{flag}: {e}")))
    };
    let x0 = num("--x0", &a.x0)?;
    let root = a.root.as_deref().map(|r| num("--root", r)).transpose()?;
    if let Some(r) = &root {
        p = p.with_root(r.clone());
    }
    let tol = match a.tol.as_deref() {
        Some(t) => match num("--tol", t)?.to_float() {
            Some(v) if v > 0 => v,
            _ => return Err(Failure::usage("--tol must be a positive real")),
        },
        None => default_tol(prec),
    };

    let trace = solve(&p, &cfg, &x0, &tol, a.max_iter);
    let coc = root.as_ref().map(|r| coc_estimate(&trace, r));
    let code = match trace.stop_reason {
        s if s.converged() => 0,
        StopReason::DomainError => 3,
        _ => 1,
    };
    let weights: BTreeMap<String, String> =
        cfg.weights.iter().map(|(k, w)| (k.to_string(), w.label().to_string())).collect();

    match sink.format {
        Format::Json => {
            let (coc_v, coc_err) = match &coc {
                Some(Ok(c)) => (serde_json::to_value(c).expect("serializable"), Value::Null),
                Some(Err(e)) => (Value::Null, json!(e.to_string())),
                None => (Value::Null, Value::Null),
            };
            sink.json(
                "solve",
                json!({
                    "config": {
                        "function": a.function,
                        "family": family.name(),
                        "m": a.m,
                        "mode": mode.name(),
                        "precision_bits": prec,
                        "tol": tol.to_string_radix(10, Some(6)),
                        "max_iter": a.max_iter,
                        "weights": weights,
                        "verification": cfg.verification.label(),
                    },
                    "trace": trace.to_json(a.digits),
                    "stop_reason": trace.stop_reason,
                    "coc": coc_v,
                    "coc_error": coc_err,
                    "exit_code": code,
                }),
            )?;
        }
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                k: usize,
                x: String,
                abs_fx: String,
                error: Option<String>,
            }
            let errs = trace.errors();
            let mut rows = vec![Row {
                k: 0,
                x: trace.x0.to_string_digits(a.digits),
                abs_fx: trace.fx0.as_ref().map(|f| f.abs().to_string_radix(10, Some(8))).unwrap_or_default(),
                error: errs.as_ref().map(|e| e[0].to_string_radix(10, Some(8))),
            }];
            for (i, r) in trace.records.iter().enumerate() {
                rows.push(Row {
                    k: i + 1,
                    x: r.x_next.to_string_digits(a.digits),
                    abs_fx: r.fx_next.abs().to_string_radix(10, Some(8)),
                    error: errs.as_ref().map(|e| e[i + 1].to_string_radix(10, Some(8))),
                });
            }
            sink.write(&csv_text(&rows)?)?;
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{} m={} mode={} prec={} verification={}",
                family.name(),
                a.m,
                mode.name(),
                prec,
                cfg.verification.label()
            );
            for (k, v) in &weights {
                let _ = writeln!(s, "  {k} = {v}");
            }
            let errs = trace.errors();
            let _ = writeln!(s, "{:>3}  {:<44} {:<14} {}", "k", "x", "|f(x)|", if errs.is_some() { "|x-root|" } else { "" });
            for (k, x) in trace.iterates().into_iter().enumerate() {
                let fx = if k == 0 { trace.fx0.as_ref().map(Scalar::abs) } else { Some(trace.records[k - 1].fx_next.abs()) };
                let _ = writeln!(
                    s,
                    "{k:>3}  {:<44} {:<14} {}",
                    x.to_string_digits(a.digits.min(40)),
                    fx.map(|v| v.to_string_radix(10, Some(6))).unwrap_or_default(),
                    errs.as_ref().map(|e| e[k].to_string_radix(10, Some(6))).unwrap_or_default()
                );
            }
            let _ = writeln!(
                s,
                "stop: {:?}, iterations {}, evaluations {}",
                trace.stop_reason,
                trace.iterations(),
                trace.evaluations
            );
            if let Some(d) = &trace.detail {
                let _ = writeln!(s, "detail: {d}");
            }
            match &coc {
                Some(Ok(c)) => {
                    let _ = writeln!(s, "coc: {:.4} over {} steps", c.final_estimate, c.steps_used);
                }
                Some(Err(e)) => {
                    let _ = writeln!(s, "coc: unavailable ({e})");
                }
                None => {}
            }
            sink.write(&s)?;
        }
    }
    Ok(code)
}

// ---- verify-order ----

fn cmd_verify_order(a: VerifyArgs, seed: u64, sink: &Sink) -> Result<u8, Failure> {
    let family = parse_family(&a.family)?;
    if a.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let mut reports: Vec<OrderReport> = Vec::new();
    for &m in &a.m {
        if m == 0 {
            return Err(Failure::usage("--m values must be at least 1"));
        }
        if family == Family::Liu3 && m < 2 {
            return Err(config_failure(ConfigError::MultiplicityOne));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(m));
        let mut b = condition_binding(family, m, &mut rng);
        if let Some(o) = a.order {
            if o == 0 {
                return Err(Failure::usage("--order must be at least 1"));
            }
            b.order = o;
        }
        apply_params(&mut b.params, &a.params)?;
        for s in &a.slots {
            let (slot, v) = parse_slot_value(family, s)?;
            b.set_slot(slot, &v);
        }
        reports.push(order_report(family, &b, a.trials, seed).map_err(|e| Failure::domain(e.to_string()))?);
    }
    match sink.format {
        Format::Json => sink.json("verify-order", json!({ "family": family.name(), "reports": reports }))?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                family: &'a str,
                m: u32,
                observed_order: usize,
                claimed_order: u32,
                truncation_order: usize,
            }
            let rows: Vec<Row> = reports
                .iter()
                .map(|r| Row {
                    family: &r.family,
                    m: r.m,
                    observed_order: r.observed_order,
                    claimed_order: r.claimed_order,
                    truncation_order: r.truncation_order,
                })
                .collect();
            sink.write(&csv_text(&rows)?)?;
        }
        Format::Text => {
            let mut s = String::new();
            for r in &reports {
                let _ = writeln!(
                    s,
                    "{} m={}: observed order {} (claimed {}, truncation {})",
                    r.family, r.m, r.observed_order, r.claimed_order, r.truncation_order
                );
                for lc in &r.leading_coefficient {
                    let verdict = if lc.matches { "matches" } else { "differs from" };
                    let _ = writeln!(
                        s,
                        "  {} ε^{} coefficient {verdict} the closed form: {} vs {}",
                        lc.series, lc.order, lc.computed, lc.paper_formula
                    );
                }
            }
            sink.write(&s)?;
        }
    }
    Ok(0)
}

// ---- derive-conditions ----

fn cmd_derive_conditions(a: DeriveArgs, seed: u64, sink: &Sink) -> Result<u8, Failure> {
    let family = parse_family(&a.family)?;
    let mut reports: Vec<DeriveReport> = Vec::new();
    for &m in &a.m {
        if m == 0 {
            return Err(Failure::usage("--m values must be at least 1"));
        }
        if family == Family::Liu3 && m < 2 {
            return Err(config_failure(ConfigError::MultiplicityOne));
        }
        let mut req = DeriveRequest::standard(family, m);
        req.seed = seed;
        apply_params(&mut req.base.params, &a.params)?;
        for s in &a.fixed {
            let (slot, v) = parse_slot_value(family, s)?;
            req.unknowns.retain(|u| *u != slot);
            req.free.retain(|u| *u != slot);
            req.base.set_slot(slot, &v);
        }
        let d = derive_conditions(&req).map_err(|e| Failure::domain(format!("{} m={m}: {e}", family.name())))?;
        reports.push(DeriveReport::from(&d));
    }
    match sink.format {
        Format::Json => sink.json("derive-conditions", json!({ "results": reports }))?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                family: &'a str,
                m: u32,
                slot: &'a str,
                value: &'a str,
            }
            let rows: Vec<Row> = reports
                .iter()
                .flat_map(|r| {
                    r.conditions.iter().map(move |(slot, value)| Row { family: &r.family, m: r.m, slot, value })
                })
                .collect();
            sink.write(&csv_text(&rows)?)?;
        }
        Format::Text => {
            let mut s = String::new();
            for r in &reports {
                let _ = writeln!(s, "{} m={}", r.family, r.m);
                for (k, v) in &r.fixed {
                    let _ = writeln!(s, "  {k} = {v} (fixed)");
                }
                for (k, v) in &r.conditions {
                    let _ = writeln!(s, "  {k} = {v}");
                }
                if !r.free.is_empty() {
                    let _ = writeln!(s, "  free: {}", r.free.join(", "));
                }
            }
            sink.write(&s)?;
        }
    }
    Ok(0)
}

// ---- bench ----

fn parse_m_list(text: &str) -> Result<Vec<u32>, Failure> {
    let bad = || Failure::usage(format!("--m `{text}`: expected A..B or a comma list"));
    let ms: Vec<u32> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ms.is_empty() || ms.contains(&0) {
        return Err(bad());
    }
    Ok(ms)
}

fn find_entry(name: &str) -> Result<CorpusEntry, Failure> {
    corpus_default()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Failure::usage(format!("unknown corpus entry `{name}` (see `mzero corpus list`)")))
}

fn cmd_bench(b: BenchCmd, seed: u64, sink: &Sink) -> Result<u8, Failure> {
    let berr = |e: bench::BenchError| match e {
        bench::BenchError::TooFewTrials { .. } | bench::BenchError::ZeroDegree => Failure::usage(e.to_string()),
        other => Failure::domain(other.to_string()),
    };
    let records: Vec<BenchRecord> = match b {
        BenchCmd::Root { m, mode, trials } => {
            let ms = parse_m_list(&m)?;
            let modes = match mode {
                BenchMode::Real => vec![DomainMode::RealSignPreserving],
                BenchMode::Complex => vec![DomainMode::ComplexPrincipal],
                BenchMode::Both => vec![DomainMode::RealSignPreserving, DomainMode::ComplexPrincipal],
            };
            let mut out = Vec::new();
            for md in modes {
                out.extend(bench::bench_root(&ms, md, trials, seed).map_err(berr)?);
            }
            out
        }
        BenchCmd::Horner { degree, trials } => vec![bench::bench_horner(degree, trials, seed).map_err(berr)?],
        BenchCmd::Step { families, entries, trials } => {
            if trials == 0 {
                return Err(Failure::usage("--trials must be at least 1"));
            }
            let mut out = Vec::new();
            for e in &entries {
                let entry = find_entry(e)?;
                for f in &families {
                    let family = parse_family(f)?;
                    let cfg = MethodConfig::default_for(family, entry.m, corpus_params(family, entry.m))
                        .map_err(config_failure)?;
                    out.push(bench::bench_family_step(&cfg, &entry, trials, seed).map_err(berr)?);
                }
            }
            out
        }
    };
    let note = records.first().map(|r| r.machine_note.clone()).unwrap_or_default();
    match sink.format {
        Format::Csv => sink.write(&bench::to_csv(&records).map_err(|e| Failure::domain(e.to_string()))?)?,
        Format::Json => sink.json("bench", json!({ "machine_note": note, "records": records }))?,
        Format::Text => {
            let mut s = format!("# {note}\n");
            let _ = writeln!(
                s,
                "{:<12} {:>4} {:<22} {:>9} {:>12} {:>12} {:>9} {:>9}",
                "kind", "m/deg", "mode", "trials", "mean_us", "stddev_us", "vs m=1", "reference"
            );
            for r in &records {
                let kind = serde_json::to_value(r.kind).expect("serializable");
                let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "{:<12} {:>4} {:<22} {:>9} {:>12.6} {:>12.6} {:>9} {:>9}",
                    kind.as_str().unwrap_or_default(),
                    r.m_or_degree,
                    r.mode,
                    r.trials,
                    r.mean_us,
                    r.stddev_us,
                    opt(r.ratio_vs_m1, 2),
                    opt(r.paper_reference_us, 2)
                );
            }
            sink.write(&s)?;
        }
    }
    Ok(0)
}

// ---- corpus ----

fn cmd_corpus(c: CorpusCmd, prec: u32, sink: &Sink) -> Result<u8, Failure> {
    match c {
        CorpusCmd::List => {
            let entries = corpus_default();
            match sink.format {
                Format::Json => sink.json("corpus-list", json!({ "entries": entries }))?,
                Format::Csv => sink.write(&csv_text(&entries)?)?,
                Format::Text => {
                    let mut s = String::new();
                    for e in &entries {
                        let _ = writeln!(
                            s,
                            "{:<11} m={}  f = {:<20} root {:<4} x0 {:<8} {}",
                            e.name,
                            e.m,
                            e.f,
                            e.root,
                            e.x0,
                            e.mode.name()
                        );
                    }
                    sink.write(&s)?;
                }
            }
            Ok(0)
        }
        CorpusCmd::Run { families, entries, max_iter, jobs } => {
            let fams: Vec<Family> = if families.iter().any(|f| f == "all") {
                Family::ALL.to_vec()
            } else {
                families.iter().map(|f| parse_family(f)).collect::<Result<_, _>>()?
            };
            let ents: Vec<CorpusEntry> = if entries.iter().any(|e| e == "all") {
                corpus_default()
            } else {
                entries.iter().map(|e| find_entry(e)).collect::<Result<_, _>>()?
            };
            if max_iter == 0 {
                return Err(Failure::usage("--max-iter must be at least 1"));
            }
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                if j == 0 {
                    return Err(Failure::usage("--jobs must be at least 1"));
                }
                pool = pool.num_threads(j);
            }
            let pool = pool.build().map_err(|e| Failure::domain(e.to_string()))?;
            let rows: Vec<CorpusRow> = pool.install(|| corpus_sweep(&fams, &ents, prec, max_iter));
            let run_rows: Vec<&CorpusRow> = rows.iter().filter(|r| r.stop_reason.is_some()).collect();
            let passed = run_rows.iter().filter(|r| r.coc_pass).count();
            let rejected = rows.len() - run_rows.len();
            match sink.format {
                Format::Json => sink.json(
                    "corpus-run",
                    json!({
                        "precision_bits": prec,
                        "rows": rows,
                        "summary": {"pairs": rows.len(), "run": run_rows.len(), "coc_pass": passed, "rejected": rejected},
                    }),
                )?,
                Format::Csv => sink.write(&csv_text(&rows)?)?,
                Format::Text => {
                    let mut s = String::new();
                    let _ = writeln!(
                        s,
                        "{:<8} {:<11} {:>2} {:<12} {:>4} {:>8} {:>4} {:>4} {:>3}  note",
                        "family", "entry", "m", "stop", "it", "coc", "ord", "pass", "br"
                    );
                    for r in &rows {
                        let _ = writeln!(
                            s,
                            "{:<8} {:<11} {:>2} {:<12} {:>4} {:>8} {:>4} {:>4} {:>3}  {}",
                            r.family,
                            r.entry,
                            r.m,
                            r.stop_reason.map(|x| format!("{x:?}")).unwrap_or_else(|| "-".into()),
                            r.iterations,
                            r.coc.map(|c| format!("{c:.3}")).unwrap_or_else(|| "-".into()),
                            r.expected_order,
                            if r.coc_pass { "yes" } else { "no" },
                            r.branch_mismatches,
                            r.note.as_deref().unwrap_or("")
                        );
                    }
                    let _ = writeln!(
                        s,
                        "{passed}/{} runs within ±{} of the exact order; {rejected} rejected",
                        run_rows.len(),
                        mzero::analysis::COC_WINDOW
                    );
                    sink.write(&s)?;
                }
            }
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_and_ranges() {
        assert_eq!(parse_rational("125/27").unwrap(), Rational::from((125, 27)));
        assert_eq!(parse_rational("-1.5e-1").unwrap(), Rational::from((-3, 20)));
        assert!(parse_rational("1/0").is_err());
        assert_eq!(parse_m_list("1..4").unwrap(), [1, 2, 3, 4]);
        assert_eq!(parse_m_list("2,5").unwrap(), [2, 5]);
        assert!(parse_m_list("0..2").is_err());
    }

    #[test]
    fn weight_specs() {
        let (n, w) = parse_weight("Q=truncated_Q(beta=1/2)", 2).unwrap();
        assert_eq!(n, WeightName::Q);
        assert!(matches!(w, BoundWeight::Bi(_)));
        let (n, w) = parse_weight("phi=expr:2-8*(x-1/2)", 2).unwrap();
        assert_eq!(n, WeightName::Phi);
        assert_eq!(w.uni().unwrap().center(), Rational::from((1, 2)));
        assert!(parse_weight("Q=expr:x", 2).is_err());
        assert!(parse_weight("P=king(beta=1", 2).is_err());
    }

    #[test]
    fn params() {
        let mut p = MethodParams::default();
        apply_params(&mut p, &["a2=-3".into(), "R_m=4".into()]).unwrap();
        assert_eq!(p.a2, -3);
        assert_eq!(p.r_m, Some(Rational::from(4)));
        assert!(apply_params(&mut p, &["beta=1".into()]).is_err());
    }
}

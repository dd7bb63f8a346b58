//! Timing of principal m-th roots, Horner evaluation and single family
//! steps. Root and Horner timing runs at hardware double precision.

use std::hint::black_box;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::CorpusEntry;
use crate::scalar::{DomainMode, Scalar};
use crate::solvers::{step_from, MethodConfig, SolveError};

/// Evaluations per timed batch.
pub const BATCH: usize = 1000;
/// Discarded evaluations before measurement.
pub const WARMUP: usize = 10_000;
pub const MIN_TRIALS: usize = 10_000;
/// Smallest |c + id| accepted for a random denominator.
pub const DENOM_FLOOR: f64 = 1e-3;

/// Mean CPU times per root evaluation, m = 1..7, in microseconds.
pub const REFERENCE_ROOT_REAL_US: [f64; 7] = [5.25, 22.7, 32.24, 31.86, 32.25, 32.03, 33.1];
pub const REFERENCE_ROOT_COMPLEX_US: [f64; 7] = [13.77, 54.82, 64.42, 64.07, 65.83, 68.05, 66.3];
/// Degree-20 Horner evaluation with complex argument.
pub const REFERENCE_HORNER20_US: f64 = 116.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("trials = {got}, need at least {min}")]
    TooFewTrials { got: usize, min: usize },
    #[error("batch time {batch_ns} ns is below 10x the timer granularity ({granularity_ns} ns)")]
    TimerResolutionTooCoarse { batch_ns: u128, granularity_ns: u128 },
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("family step failed at the bench iterate: {0}")]
    Step(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    Root,
    Horner,
    FamilyStep,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRecord {
    pub kind: BenchKind,
    pub m_or_degree: u32,
    pub mode: String,
    pub trials: usize,
    pub mean_us: f64,
    pub stddev_us: f64,
    pub ratio_vs_m1: Option<f64>,
    pub paper_reference_us: Option<f64>,
    #[serde(skip)]
    pub machine_note: String,
}

impl BenchRecord {
    /// Standard error of the mean over batches.
    pub fn std_error_us(&self) -> f64 {
        let batches = (self.trials / self.batch_len()).max(1) as f64;
        self.stddev_us / batches.sqrt()
    }

    fn batch_len(&self) -> usize {
        match self.kind {
            BenchKind::FamilyStep => FAMILY_BATCH,
            _ => BATCH,
        }
    }
}

/// Smallest nonzero difference between successive clock readings.
pub fn timer_granularity() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..1000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

/// Pins the calling thread to the CPU it is running on (Linux only).
pub fn pin_current_thread() -> bool {
    #[cfg(target_os = "linux")]
    // SAFETY: plain libc calls on a zero-initialized cpu_set_t owned by this frame.
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return false;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
    #[cfg(not(target_os = "linux"))]
    false
}

fn machine_note() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{} {}, {threads} hw threads, f64", std::env::consts::OS, std::env::consts::ARCH)
}

/// Principal m-th root `|z|^{1/m} (cos(θ/m) + i sin(θ/m))`, `θ ∈ (−π, π]`.
#[inline]
pub fn principal_root_c64(z: Complex64, m: u32) -> Complex64 {
    if m == 1 {
        return z;
    }
    let r = z.norm().powf(1.0 / m as f64);
    let (s, c) = (z.im.atan2(z.re) / m as f64).sin_cos();
    Complex64::new(r * c, r * s)
}

/// Sign-preserving real m-th root.
#[inline]
pub fn real_root_f64(x: f64, m: u32) -> f64 {
    match m {
        1 => x,
        2 => x.abs().sqrt(),
        _ => x.abs().powf(1.0 / m as f64).copysign(x),
    }
}

#[inline]
pub fn horner_c64(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

struct Stats {
    mean_us: f64,
    stddev_us: f64,
}

/// Times `batches` runs of `run`, each on inputs freshly produced by
/// `fill`; returns per-evaluation statistics.
fn time_batches<T>(
    batches: usize,
    batch: usize,
    fill: impl FnMut(&mut Vec<T>),
    mut run: impl FnMut(&[T]) -> f64,
    granularity: Duration,
) -> Result<Stats, BenchError> {
    let mut stats = time_rounds(batches, 1, batch, fill, |_, b| run(b), granularity)?;
    Ok(stats.remove(0))
}

/// Like [`time_batches`] for `variants` workloads, interleaved batch by
/// batch so clock-speed drift during the run hits every variant alike.
fn time_rounds<T>(
    batches: usize,
    variants: usize,
    batch: usize,
    mut fill: impl FnMut(&mut Vec<T>),
    mut run: impl FnMut(usize, &[T]) -> f64,
    granularity: Duration,
) -> Result<Vec<Stats>, BenchError> {
    let mut buf = Vec::with_capacity(batch);
    let mut sink = 0.0;
    let mut per_eval = vec![Vec::with_capacity(batches); variants];
    for _ in 0..batches {
        for (k, samples) in per_eval.iter_mut().enumerate() {
            buf.clear();
            fill(&mut buf);
            let start = Instant::now();
            sink += run(k, black_box(&buf));
            let elapsed = start.elapsed();
            if elapsed < granularity * 10 {
                return Err(BenchError::TimerResolutionTooCoarse {
                    batch_ns: elapsed.as_nanos(),
                    granularity_ns: granularity.as_nanos(),
                });
            }
            samples.push(elapsed.as_secs_f64() * 1e6 / batch as f64);
        }
    }
    black_box(sink);
    Ok(per_eval
        .iter()
        .map(|v| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Stats { mean_us: mean, stddev_us: var.sqrt() }
        })
        .collect())
}

fn random_denominator(rng: &mut impl Rng, complex: bool) -> (f64, f64) {
    loop {
        let c: f64 = rng.gen_range(-1.0..=1.0);
        let d = if complex { rng.gen_range(-1.0..=1.0) } else { 0.0 };
        if (c * c + d * d).sqrt() >= DENOM_FLOOR {
            return (c, d);
        }
    }
}

/// Times `((a + ib)/(c + id))^{1/m}` for each `m`, with `a, b, c, d`
/// uniform in `[-1, 1]` and redrawn for every evaluation; real mode sets
/// `b = d = 0`. The m values take turns batch by batch. Runs on the calling
/// thread.
pub fn bench_root(ms: &[u32], mode: DomainMode, trials: usize, seed: u64) -> Result<Vec<BenchRecord>, BenchError> {
    if trials < MIN_TRIALS {
        return Err(BenchError::TooFewTrials { got: trials, min: MIN_TRIALS });
    }
    pin_current_thread();
    let granularity = timer_granularity();
    let complex = mode == DomainMode::ComplexPrincipal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = trials.div_ceil(BATCH);
    let fill = |buf: &mut Vec<(f64, f64, f64, f64)>, rng: &mut ChaCha8Rng| {
        for _ in 0..BATCH {
            let a = rng.gen_range(-1.0..=1.0);
            let b = if complex { rng.gen_range(-1.0..=1.0) } else { 0.0 };
            let (c, d) = random_denominator(rng, complex);
            buf.push((a, b, c, d));
        }
    };
    let run = |k: usize, buf: &[(f64, f64, f64, f64)]| -> f64 {
        let m = ms[k];
        let mut acc = 0.0;
        if complex {
            for &(a, b, c, d) in buf {
                let r = principal_root_c64(Complex64::new(a, b) / Complex64::new(c, d), m);
                acc += r.re + r.im;
            }
        } else {
            for &(a, _, c, _) in buf {
                acc += real_root_f64(a / c, m);
            }
        }
        acc
    };
    time_rounds(WARMUP / BATCH, ms.len(), BATCH, |b| fill(b, &mut rng), run, granularity)?;
    let stats = time_rounds(batches, ms.len(), BATCH, |b| fill(b, &mut rng), run, granularity)?;
    let reference = if complex { REFERENCE_ROOT_COMPLEX_US } else { REFERENCE_ROOT_REAL_US };
    let mut out: Vec<BenchRecord> = ms
        .iter()
        .zip(stats)
        .map(|(&m, st)| BenchRecord {
            kind: BenchKind::Root,
            m_or_degree: m,
            mode: mode.name().into(),
            trials: batches * BATCH,
            mean_us: st.mean_us,
            stddev_us: st.stddev_us,
            ratio_vs_m1: None,
            paper_reference_us: reference.get(m as usize - 1).copied(),
            machine_note: machine_note(),
        })
        .collect();
    if let Some(base) = out.iter().find(|r| r.m_or_degree == 1).map(|r| r.mean_us) {
        for r in &mut out {
            r.ratio_vs_m1 = Some(r.mean_us / base);
        }
    }
    Ok(out)
}

/// Times Horner evaluation of a random real polynomial of `degree` at a
/// random complex argument, both redrawn every evaluation.
pub fn bench_horner(degree: u32, trials: usize, seed: u64) -> Result<BenchRecord, BenchError> {
    if degree == 0 {
        return Err(BenchError::ZeroDegree);
    }
    if trials < MIN_TRIALS {
        return Err(BenchError::TooFewTrials { got: trials, min: MIN_TRIALS });
    }
    pin_current_thread();
    let granularity = timer_granularity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = degree as usize + 1;
    let batches = trials.div_ceil(BATCH);
    // one flat buffer per batch: n coefficients then the argument
    let fill = |buf: &mut Vec<f64>, rng: &mut ChaCha8Rng| {
        for _ in 0..BATCH {
            for _ in 0..n + 2 {
                buf.push(rng.gen_range(-1.0..=1.0));
            }
        }
    };
    let run = |buf: &[f64]| -> f64 {
        let mut acc = 0.0;
        for chunk in buf.chunks_exact(n + 2) {
            let z = Complex64::new(chunk[n], chunk[n + 1]);
            let r = horner_c64(&chunk[..n], z);
            acc += r.re + r.im;
        }
        acc
    };
    time_batches(WARMUP / BATCH, BATCH, |b| fill(b, &mut rng), run, granularity)?;
    let stats = time_batches(batches, BATCH, |b| fill(b, &mut rng), run, granularity)?;
    Ok(BenchRecord {
        kind: BenchKind::Horner,
        m_or_degree: degree,
        mode: "complex".into(),
        trials: batches * BATCH,
        mean_us: stats.mean_us,
        stddev_us: stats.stddev_us,
        ratio_vs_m1: None,
        paper_reference_us: (degree == 20).then_some(REFERENCE_HORNER20_US),
        machine_note: machine_note(),
    })
}

/// Steps per timed batch for the family-step benchmark.
pub const FAMILY_BATCH: usize = 50;
/// Working precision of the family-step benchmark (a double's mantissa).
pub const FAMILY_PRECISION: u32 = 53;

/// Times one iteration step of `cfg` on `entry` at 53-bit precision, from
/// the entry's start point shifted by a fresh offset in `±1%` of its
/// distance to the root each step.
pub fn bench_family_step(
    cfg: &MethodConfig,
    entry: &CorpusEntry,
    trials: usize,
    seed: u64,
) -> Result<BenchRecord, BenchError> {
    assert!(trials >= 1, "trials must be positive");
    let prec = FAMILY_PRECISION;
    let bad = |e: &dyn std::fmt::Display| BenchError::Step(e.to_string());
    let p = entry.problem(prec).map_err(|e| bad(&e))?;
    let x0 = entry.x0_at(prec).map_err(|e| bad(&e))?;
    let alpha = entry.root_at(prec).map_err(|e| bad(&e))?;
    let dist = (&x0 - &alpha).abs().to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = |buf: &mut Vec<(Scalar, Scalar)>, rng: &mut ChaCha8Rng| {
        for _ in 0..FAMILY_BATCH {
            let off = Scalar::from_f64(rng.gen_range(-0.01..=0.01) * dist, prec);
            let x = &x0 + &off;
            let fx = p.f.eval(&x).expect("corpus entry evaluates near its start point");
            buf.push((x, fx));
        }
    };
    let failure = std::cell::RefCell::new(None::<SolveError>);
    let run = |buf: &[(Scalar, Scalar)]| -> f64 {
        let mut acc = 0.0;
        for (x, fx) in buf {
            match step_from(&p, cfg, x, fx) {
                Ok(o) => acc += o.x.re().to_f64(),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                }
            }
        }
        acc
    };
    let granularity = timer_granularity();
    let batches = trials.div_ceil(FAMILY_BATCH);
    time_batches(2, FAMILY_BATCH, |b| starts(b, &mut rng), run, granularity)?;
    let stats = time_batches(batches, FAMILY_BATCH, |b| starts(b, &mut rng), run, granularity)?;
    if let Some(e) = failure.into_inner() {
        return Err(BenchError::Step(e.to_string()));
    }
    Ok(BenchRecord {
        kind: BenchKind::FamilyStep,
        m_or_degree: entry.m,
        mode: format!("{}:{}", cfg.family.name(), entry.name),
        trials: batches * FAMILY_BATCH,
        mean_us: stats.mean_us,
        stddev_us: stats.stddev_us,
        ratio_vs_m1: None,
        paper_reference_us: None,
        machine_note: format!("{}, {prec}-bit MPFR", machine_note()),
    })
}

/// CSV with columns `kind, m_or_degree, mode, trials, mean_us, stddev_us,
/// ratio_vs_m1, paper_reference_us`.
pub fn to_csv(records: &[BenchRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

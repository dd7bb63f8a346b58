//! Coarse timing sanity with wide margins; one test so runs do not overlap.

use mzero::analysis::{corpus_default, corpus_params};
use mzero::bench::{bench_family_step, bench_horner};
use mzero::solvers::MethodConfig;
use mzero::Family;

#[test]
fn cheaper_work_times_faster() {
    let short = bench_horner(1, 20_000, 3).unwrap();
    let long = bench_horner(20, 20_000, 3).unwrap();
    assert!(short.mean_us < long.mean_us, "{} vs {}", short.mean_us, long.mean_us);

    // two points against three at the same precision
    let entry = corpus_default().into_iter().find(|e| e.name == "exp_m2").unwrap();
    let step = |f: Family| {
        let cfg = MethodConfig::default_for(f, 2, corpus_params(f, 2)).unwrap();
        bench_family_step(&cfg, &entry, 500, 3).unwrap().mean_us
    };
    let (two, three) = (step(Family::Zhou23), step(Family::PQ12));
    assert!(two < three, "{two} vs {three}");
}

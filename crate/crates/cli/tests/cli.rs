use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn mzero(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mzero"))
        .args(args)
        .env_remove("MZERO_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn schema(name: &str) -> Value {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Envelope and top-level required keys against the published schema.
fn check_envelope(v: &Value, name: &str) {
    let s = schema(name);
    assert_eq!(v["schema"], s["properties"]["schema"]["const"]);
    assert_eq!(v["schema_version"], s["properties"]["schema_version"]["const"]);
    for key in s["required"].as_array().unwrap() {
        assert!(v.get(key.as_str().unwrap()).is_some(), "{name}: missing {key}");
    }
}

#[test]
fn solve_fam18_reports_fourth_order() {
    let o = mzero(&[
        "solve", "--fn", "(x-1)^2*exp(x)", "--m", "2", "--family", "fam18", "--x0", "1.5", "--prec", "2048", "--root",
        "1", "--out", "json",
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    check_envelope(&v, "solve");
    assert_eq!(v["stop_reason"], "ResidualTol");
    let coc = v["coc"]["final_estimate"].as_f64().unwrap();
    assert!((coc - 4.0).abs() < 0.5, "coc {coc}");
}

#[test]
fn schroder_one_step_on_pure_power() {
    let o = mzero(&["solve", "--fn", "(x-5)^3", "--m", "3", "--family", "schroder", "--x0", "9", "--out", "json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["trace"]["iterations"], 1);
}

#[test]
fn exit_codes() {
    let o = mzero(&["solve", "--fn", "x^2-4", "--m", "1", "--family", "fam3", "--x0", "2.1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("m >= 2"));

    let o = mzero(&["solve", "--fn", "x^2+1", "--family", "fam18", "--x0", "0.5", "--max-iter", "3"]);
    assert_eq!(code(&o), 1);

    let o = mzero(&["solve", "--fn", "log(x)", "--family", "fam18", "--x0", "-2"]);
    assert_eq!(code(&o), 3);

    assert_eq!(code(&mzero(&["solve", "--fn", "x^2-", "--family", "fam18", "--x0", "1"])), 2);
    assert_eq!(code(&mzero(&["solve", "--fn", "x-1", "--family", "fam18", "--x0", "1", "--bogus"])), 2);
    assert_eq!(code(&mzero(&["solve", "--fn", "x-1", "--family", "fam22", "--x0", "2"])), 2);
    assert_eq!(code(&mzero(&["solve", "--fn", "x-1", "--family", "nope", "--x0", "2"])), 2);
}

#[test]
fn weights_and_params_from_flags() {
    let o = mzero(&[
        "solve", "--fn", "(x-1)^3*exp(x)", "--m", "3", "--family", "fam22", "--param", "r_m=125/27", "--x0", "1.1",
        "--root", "1", "--prec", "1024", "--out", "json",
    ]);
    assert_eq!(code(&o), 0);
    let o = mzero(&[
        "solve", "--fn", "(x-2)^2*(x+3)", "--m", "2", "--family", "fam18", "--weight", "P=king(beta=1/3)", "--x0", "2.1",
        "--out", "json",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["config"]["weights"]["P"], "king(beta=1/3)");
    // P'(0) = 1 breaks the conditions
    let o = mzero(&["solve", "--fn", "(x-2)^2", "--m", "2", "--family", "fam18", "--weight", "P=expr:1+x", "--x0", "2.1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_order_reports() {
    let o = mzero(&["verify-order", "--family", "fam12", "--m", "2,3,4", "--out", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    check_envelope(&v, "verify-order");
    let orders: Vec<u64> = v["reports"].as_array().unwrap().iter().map(|r| r["observed_order"].as_u64().unwrap()).collect();
    assert_eq!(orders, [8, 8, 8]);

    let v = json(&mzero(&["verify-order", "--family", "fam18", "--m", "1", "--out", "json"]));
    assert_eq!(v["reports"][0]["observed_order"], 4);

    let v = json(&mzero(&["verify-order", "--family", "fam18", "--m", "2", "--slot", "P1=0", "--out", "json"]));
    assert!(v["reports"][0]["observed_order"].as_u64().unwrap() <= 3);
}

#[test]
fn seeded_reports_are_reproducible() {
    let args = ["--seed", "11", "verify-order", "--family", "fam15b", "--m", "2", "--out", "json"];
    assert_eq!(mzero(&args).stdout, mzero(&args).stdout);
}

fn conditions(v: &Value) -> Vec<(String, String)> {
    v["results"][0]["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_str().unwrap().to_string(), p[1].as_str().unwrap().to_string()))
        .collect()
}

fn has(c: &[(String, String)], k: &str, v: &str) -> bool {
    c.iter().any(|(a, b)| a == k && b == v)
}

#[test]
fn derive_conditions_reports() {
    let v = json(&mzero(&["derive-conditions", "--family", "fam18", "--out", "json"]));
    check_envelope(&v, "derive-conditions");
    let c = conditions(&v);
    assert!(has(&c, "P0", "1") && has(&c, "P1", "2") && has(&c, "P2", "arbitrary"));

    let c = conditions(&json(&mzero(&[
        "derive-conditions", "--family", "fam7b", "--m", "3", "--fix", "H2=12", "--out", "json",
    ])));
    assert!(has(&c, "P2", "14"), "{c:?}");

    let c = conditions(&json(&mzero(&["derive-conditions", "--family", "fam23", "--m", "2", "--out", "json"])));
    assert!(has(&c, "Phi0", "2") && has(&c, "Phi1", "-8") && has(&c, "Phi2", "64"), "{c:?}");
}

#[test]
fn bench_csv_shape_is_stable() {
    let args = ["bench", "root", "--m", "1..7", "--mode", "both", "--trials", "10000"];
    let shape = |o: Output| -> Vec<String> {
        assert_eq!(code(&o), 0);
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
            .collect()
    };
    let a = shape(mzero(&args));
    assert_eq!(a.len(), 15);
    assert_eq!(a[0], "kind,m_or_degree,mode,trials");
    assert_eq!(a, shape(mzero(&args)));

    let o = mzero(&["bench", "horner", "--degree", "20", "--trials", "10000", "--out", "json"]);
    let v = json(&o);
    check_envelope(&v, "bench");
    assert_eq!(v["records"][0]["paper_reference_us"], 116.0);

    assert_eq!(code(&mzero(&["bench", "root", "--trials", "100"])), 2);
    assert_eq!(code(&mzero(&["bench", "step", "--trials", "0"])), 2);
}

#[test]
fn corpus_list_and_rejection_row() {
    let v = json(&mzero(&["corpus", "list", "--out", "json"]));
    check_envelope(&v, "corpus-list");
    assert_eq!(v["entries"].as_array().unwrap().len(), 8);

    let v = json(&mzero(&["corpus", "run", "--family", "fam3", "--jobs", "2", "--out", "json"]));
    check_envelope(&v, "corpus-run");
    let rows = v["rows"].as_array().unwrap();
    let simple = rows.iter().find(|r| r["entry"] == "simple").unwrap();
    assert!(simple["note"].as_str().unwrap().starts_with("rejected"));
    assert!(simple["stop_reason"].is_null());
}

#[test]
fn config_file_and_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "prec = 256\n[solve]\nfn = \"(x-2)^3*(x+1)\"\nm = 3\nfamily = \"fam12\"\nx0 = \"2.4\"\nroot = \"2\"\n",
    )
    .unwrap();
    let out = dir.path().join("report.json");
    let o = mzero(&[
        "--config", cfg.to_str().unwrap(), "solve", "--x0", "2.2", "--out", "json", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["precision_bits"], 256);
    assert_eq!(v["config"]["family"], "fam12");
    assert_eq!(v["trace"]["x0"].as_str().unwrap().parse::<f64>().unwrap(), 2.2);

    std::fs::write(&cfg, "[solve]\nnot_a_flag = 1\n").unwrap();
    let o = mzero(&["--config", cfg.to_str().unwrap(), "solve", "--fn", "x-1", "--family", "fam18", "--x0", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn precision_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_mzero"))
        .args(["solve", "--fn", "x^2-2", "--family", "fam18", "--x0", "1.5", "--out", "json"])
        .env("MZERO_PRECISION_BITS", "300")
        .output()
        .unwrap();
    assert_eq!(json(&o)["config"]["precision_bits"], 300);
}

//! One step of every family against values frozen from an independent
//! mpmath implementation (tools/reference_steps.py, 70 digits).

use std::collections::BTreeMap;

use mzero::solvers::{self, step_from, MethodConfig, Problem};
use mzero::weights::{builtin, builtin2, BoundWeight, ParamMap, Weight1, Weight2, WeightName, WeightSet};
use mzero::{DomainMode, Family, MethodParams, Scalar};
use rug::ops::Pow;
use rug::{Float, Rational};

const PREC: u32 = 256;
/// Frozen values carry 50 significant digits.
const DIGITS_AGREED: i32 = 45;

const REFERENCE: &[(&str, &str, &str)] = &[
    ("schroder_exp2", "1.1000000000000000000000000000000000000000000000000", "0"),
    ("fam18_exp2", "1.0005490703533727777444240395799038433103317554638", "0"),
    ("fam18_simple", "2.0175353572880150383579738860945994004978915815679", "0"),
    ("fam1_exp2", "1.0005490703533727777444240395799038433103317554638", "0"),
    ("fam2_exp2", "1.0013925238966242197201883580559319333307235398051", "0"),
    ("fam3_exp3", "1.0018307136565476920728167429359057869394293300230", "0"),
    ("fam4_exp2", "1.0000218355306787064845462650259029400254554776805", "0"),
    ("fam12_exp2", "1.0000007739151798477576541610103305354882294473989", "0"),
    ("fam15b_exp2", "1.0000005218627619202852120006287970556355656144007", "0"),
    ("fam7b_exp3", "0.99999999945418529868511143400337748779569021348907", "0"),
    ("fam22_exp3", "1.0003302776006717977549996155926187000437884647655", "0"),
    ("fam23_exp2", "1.0003232717501205909611192789680091866682450061063", "0"),
    (
        "fam7b_exp3_complex",
        "0.99990916028423565185759826331084446890585450476875",
        "-0.000052715833106529222580301425009914254241336310580457",
    ),
];

fn reference(name: &str) -> (Float, Float) {
    let (_, re, im) = REFERENCE.iter().find(|r| r.0 == name).unwrap();
    let parse = |s: &str| Float::with_val(PREC, Float::parse(s).unwrap());
    (parse(re), parse(im))
}

fn check(name: &str, got: &Scalar) {
    let (re, im) = reference(name);
    let tol = Float::with_val(PREC, 10f64).pow(-DIGITS_AGREED);
    let dre = Float::with_val(PREC, got.re() - &re).abs();
    let dim = Float::with_val(PREC, got.im() - &im).abs();
    assert!(dre < tol && dim < tol, "{name}: got {} + {}i", got.re().to_string_radix(10, Some(50)), got.im());
}

fn exp2() -> Problem {
    Problem::parse("(x-1)^2*exp(x)", 2, DomainMode::RealSignPreserving).unwrap()
}

fn exp3(mode: DomainMode) -> Problem {
    Problem::parse("(x-1)^3*exp(x)", 3, mode).unwrap()
}

fn x(text: &str) -> Scalar {
    Scalar::parse(text, PREC).unwrap()
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn ints(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&k| Rational::from(k)).collect()
}

fn poly(c: &[i64]) -> Weight1 {
    Weight1::taylor(Rational::new(), ints(c))
}

fn beta(b: i64) -> ParamMap {
    [("beta".to_string(), Rational::from(b))].into_iter().collect()
}

fn run(p: &Problem, family: Family, ws: Vec<(WeightName, BoundWeight)>, params: MethodParams, x0: &Scalar) -> Scalar {
    let ws: WeightSet = ws.into_iter().collect();
    let cfg = MethodConfig::unverified(family, ws, params).unwrap();
    let fx = p.f.eval(x0).unwrap();
    step_from(p, &cfg, x0, &fx).unwrap().x
}

#[test]
fn schroder_and_two_point() {
    check("schroder_exp2", &solvers::schroder_step(&exp2(), &x("1.5")).unwrap());
    let tp0 = builtin("truncated_P", &beta(0)).unwrap();
    check("fam18_exp2", &solvers::step_two_point(&exp2(), &x("1.2"), &tp0).unwrap());
    let simple = Problem::parse("x^2-4", 1, DomainMode::RealSignPreserving).unwrap();
    check("fam18_simple", &solvers::step_two_point(&simple, &x("3"), &tp0).unwrap());

    let g = BoundWeight::Uni(tp0.times_identity());
    check("fam1_exp2", &run(&exp2(), Family::Zhou1, vec![(WeightName::G, g)], MethodParams::default(), &x("1.2")));

    let w = builtin("W_lee", &[("c".to_string(), q(1, 1)), ("r".to_string(), q(2, 1))].into_iter().collect()).unwrap();
    let params = MethodParams { lambda: q(1, 2), ..MethodParams::default() };
    check("fam2_exp2", &run(&exp2(), Family::Lee2, vec![(WeightName::W, BoundWeight::Uni(w))], params, &x("1.2")));
}

#[test]
fn derivative_ratio_families() {
    let p = exp3(DomainMode::RealSignPreserving);
    check("fam3_exp3", &solvers::step_liu(&p, &x("1.3"), &poly(&[0, 1, 3])).unwrap());
    check("fam22_exp3", &solvers::step_li22(&p, &x("1.3"), &q(125, 27)).unwrap());

    // φ(t) = 2 - 8(t - 1/2) + 32(t - 1/2)^2
    let phi = Weight1::taylor(q(1, 2), ints(&[2, -8, 32]));
    check("fam23_exp2", &solvers::step_zhou23(&exp2(), &x("1.2"), &phi).unwrap());
}

#[test]
fn three_point_families() {
    let p1 = builtin("truncated_P", &beta(1)).unwrap();
    let q1 = builtin2("truncated_Q", &beta(1)).unwrap();
    check("fam12_exp2", &solvers::step_three_point_pq(&exp2(), &x("1.2"), &p1, &q1).unwrap());

    let got = solvers::step_three_point_hpgl(
        &exp2(),
        &x("1.2"),
        &poly(&[1, 2]),
        &poly(&[1, 2, 1, -4]),
        &poly(&[0, 1, 1]),
        &poly(&[1, 2]),
    )
    .unwrap();
    check("fam15b_exp2", &got);

    let (h, pw, g) = (poly(&[1, 2, 6]), poly(&[1, 2, 7, 8]), poly(&[1, 1]));
    let real = exp3(DomainMode::RealSignPreserving);
    check("fam7b_exp3", &solvers::step_7b(&real, &x("1.3"), &h, &pw, &g).unwrap());
    let complex = exp3(DomainMode::ComplexPrincipal);
    check("fam7b_exp3_complex", &solvers::step_7b(&complex, &x("1.3"), &h, &pw, &g).unwrap());

    let s = poly(&[2, 3, -1]);
    let r = Weight2::poly(BTreeMap::from([
        ((0, 0), Rational::from(2)),
        ((1, 0), Rational::from(1)),
        ((0, 1), Rational::from(3)),
        ((1, 1), Rational::from(1)),
    ]));
    let params = MethodParams { a1: q(2, 1), a2: q(1, 1), ..MethodParams::default() };
    let ws = vec![(WeightName::S, BoundWeight::Uni(s)), (WeightName::R, BoundWeight::Bi(r))];
    check("fam4_exp2", &run(&exp2(), Family::Behl4, ws, params, &x("1.2")));
}

use mzero::analysis::corpus_params;
use mzero::scalar::ratio_power;
use mzero::series::{derive_conditions, expand_family, observed_order, DeriveRequest, Derived, SymbolBinding};
use mzero::solvers::{default_tol, solve, MethodConfig, Problem, Trace};
use mzero::{DomainMode, Family, Scalar};
use proptest::prelude::*;
use rug::{Float, Rational};

const PREC: u32 = 512;

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn nonzero_q() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=9).prop_filter_map("nonzero", |(n, d)| (n != 0).then(|| q(n, d)))
}

fn close(a: &Scalar, b: &Scalar) -> bool {
    let scale = b.abs().max(&Float::with_val(PREC, 1));
    (a - b).abs() <= scale * Float::with_val(PREC, Float::i_exp(1, -(PREC as i32 - 64)))
}

fn run(text: &str, family: Family, x0: &Scalar) -> Trace {
    let p = Problem::parse(text, 2, DomainMode::RealSignPreserving).unwrap();
    let cfg = MethodConfig::default_for(family, 2, corpus_params(family, 2)).unwrap();
    solve(&p, &cfg, x0, &default_tol(PREC), 3)
}

/// Compares the iterates both traces reached; a rounding difference may
/// end one of them a step earlier.
fn same_path(a: &Trace, b: &Trace, shift: &Scalar) -> bool {
    let (xa, xb) = (a.iterates(), b.iterates());
    xa.len() >= 2 && xb.len() >= 2 && xa.iter().zip(&xb).all(|(p, r)| close(&(*r - shift), p))
}

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ratio_power_ignores_a_positive_common_factor(
        a in nonzero_q(), b in nonzero_q(), c in 1i64..1000, m in 1u32..8,
    ) {
        let s = |r: &Rational| Scalar::from_rational(r, PREC);
        let c = q(c, 7);
        for mode in [DomainMode::RealSignPreserving, DomainMode::ComplexPrincipal] {
            let plain = ratio_power(&s(&a), &s(&b), m, mode);
            let scaled = ratio_power(&s(&Rational::from(&a * &c)), &s(&Rational::from(&b * &c)), m, mode);
            match (plain, scaled) {
                (Ok(x), Ok(y)) => prop_assert!(close(&x, &y)),
                (Err(x), Err(y)) => prop_assert_eq!(x, y),
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }

    #[test]
    fn schroder_error_starts_at_c1_over_m(m in 1u32..7, c in prop::collection::vec(-20i64..=20, 1..6)) {
        let c: Vec<Rational> = c.into_iter().map(|k| q(k, 3)).collect();
        let b = SymbolBinding::new(m, 6).with_c(c.clone());
        let e = expand_family(Family::Schroder, &b).unwrap();
        prop_assert_eq!(e.coeff(0).unwrap(), &Rational::new());
        prop_assert_eq!(e.coeff(1).unwrap(), &Rational::new());
        prop_assert_eq!(e.coeff(2).unwrap(), &Rational::from(&c[0] / m));
    }

    #[test]
    fn scaling_f_keeps_the_iterates(fam in family(), c in nonzero_q(), x0 in 105i64..130) {
        let x0 = Scalar::from_rational(&q(x0, 100), PREC);
        let base = run("(x-1)^2*exp(x)", fam, &x0);
        // real mode needs u = (f(y)/f(x))^{1/2} to stay real: keep the sign
        let c = c.abs();
        let scaled = run(&format!("({c})*(x-1)^2*exp(x)"), fam, &x0);
        prop_assert!(same_path(&base, &scaled, &Scalar::zero(PREC)), "{}", fam.name());
    }

    #[test]
    fn shifting_f_shifts_the_iterates(fam in family(), s in -16i64..=16, x0 in 105i64..130) {
        let x0 = Scalar::from_rational(&q(x0, 100), PREC);
        let shift = Scalar::from_rational(&q(s, 8), PREC);
        let base = run("(x-1)^2*exp(x)", fam, &x0);
        let g = format!("((x-({s}/8))-1)^2*exp(x-({s}/8))");
        let moved = run(&g, fam, &(&x0 + &shift));
        prop_assert!(same_path(&base, &moved, &shift), "{}", fam.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn derived_conditions_give_the_claimed_order(
        fam in prop::sample::select(vec![Family::TwoPoint18, Family::Zhou1, Family::Liu3, Family::PQ12, Family::Mod7b]),
        m in 2u32..5,
        free in prop::collection::vec(nonzero_q(), 4),
    ) {
        let req = DeriveRequest::standard(fam, m);
        let d = derive_conditions(&req).unwrap();
        let mut b = req.base.clone();
        let pick = |slot| {
            let i = req.free.iter().chain(&req.unknowns).position(|s| *s == slot).unwrap_or(0);
            free[i % free.len()].clone()
        };
        for s in &req.free {
            b.set_slot(*s, &pick(*s));
        }
        for (s, v) in &d.values {
            let value = match v {
                Derived::Value(a) => a.eval(pick),
                Derived::Arbitrary => pick(*s),
            };
            b.set_slot(*s, &value);
        }
        prop_assert_eq!(observed_order(fam, &b, 2, 7).unwrap(), fam.claimed_order() as usize);
    }
}

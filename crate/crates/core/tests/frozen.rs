//! Hand-derived values.

use mzero::analysis::{corpus_default, corpus_run};
use mzero::scalar::{principal_root, COC_PRECISION};
use mzero::series::{expand_family, SymbolBinding};
use mzero::weights::{Slot, WeightName};
use mzero::{Family, Scalar};
use rug::{Complex, Float, Rational};

const PREC: u32 = 256;

fn near(got: &Scalar, re: f64, im: f64) {
    let want = Scalar::complex(Complex::with_val(PREC, (re, im)));
    assert!((got - &want).abs() < 1e-15, "{got:?}");
}

#[test]
fn principal_roots() {
    let r = principal_root(&Scalar::from_int(-8, PREC), 3).unwrap();
    near(&r, 1.0, 3f64.sqrt());
    let i = Scalar::complex(Complex::with_val(PREC, (0, 1)));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    near(&principal_root(&i, 2).unwrap(), h, h);
    // cube of the root recovers -8 to working precision
    let back = &(&r * &r) * &r;
    assert!((&back + &Scalar::from_int(8, PREC)).abs() < Float::with_val(PREC, Float::i_exp(1, -240)));
}

#[test]
fn two_point_error_constant() {
    // m = 2, C1 = C2 = 1, P2 = 0: (C1^3 (m + 9 - P2) - 2m C1 C2) / (2 m^3) = 7/16
    let mut b = SymbolBinding::new(2, 6).with_c(vec![Rational::from(1), Rational::from(1)]);
    for (k, v) in [(0, 1), (1, 2), (2, 0)] {
        b.set_slot(Slot::Deriv(WeightName::P, k), &Rational::from(v));
    }
    let e = expand_family(Family::TwoPoint18, &b).unwrap();
    assert!(e.coeffs()[..4].iter().all(|c| *c == 0));
    assert_eq!(e.coeff(4).unwrap(), &Rational::from((7, 16)));
}

#[test]
fn coc_on_the_exponential_double_root() {
    let entry = corpus_default().into_iter().find(|e| e.name == "exp_m2").unwrap();
    for (family, order) in [(Family::Schroder, 2.0), (Family::TwoPoint18, 4.0), (Family::PQ12, 8.0)] {
        let row = corpus_run(family, &entry, COC_PRECISION, 50);
        let coc = row.coc.unwrap();
        assert!((coc - order).abs() <= 0.5, "{}: {coc}", family.name());
    }
}

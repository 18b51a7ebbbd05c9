mod common;

use common::{angular_quadrature, radial_quadrature};
use gcm_core::basis::{BasisState, QuantScheme};
use gcm_core::hamiltonian::{angular_element, radial_coefficient};

const K: f64 = 1.7;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-8 * b.abs().max(scale)
}

fn check_radial(scheme: QuantScheme) {
    let m0 = if scheme == QuantScheme::TwoDOdd { 1 } else { 0 };
    let mut worst: f64 = 0.0;
    for m in m0..=10u32 {
        for n in 0..=20u32 {
            for n2 in 0..=20u32 {
                let ket = BasisState::new(n, m);
                for (p, bra) in [(2, BasisState::new(n2, m)), (4, BasisState::new(n2, m)), (3, BasisState::new(n2, m + 1))] {
                    let oracle = radial_quadrature(scheme, p, bra, ket, K);
                    let formula = radial_coefficient(p, bra, ket, scheme) * K.powf(-(p as f64) / 2.0);
                    // scale for entries that vanish by selection rules
                    let scale = K.powf(-(p as f64) / 2.0) * (n + n2 + 3 * m + 3) as f64;
                    assert!(close(formula, oracle, scale), "{scheme} p={p} {bra:?} {ket:?}: {formula} vs {oracle}");
                    if oracle.abs() > 1e-3 {
                        worst = worst.max((formula - oracle).abs() / oracle.abs());
                    }
                }
            }
        }
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn radial_elements_2d_match_gauss_laguerre() {
    check_radial(QuantScheme::TwoDEven);
}

#[test]
fn radial_elements_5d_match_gauss_laguerre() {
    check_radial(QuantScheme::FiveD);
}

#[test]
fn radial_functions_are_orthonormal() {
    for scheme in [QuantScheme::TwoDEven, QuantScheme::FiveD] {
        for m in 0..=5 {
            for n in 0..=10 {
                for n2 in 0..=10 {
                    let v = radial_quadrature(scheme, 0, BasisState::new(n2, m), BasisState::new(n, m), K);
                    let want = if n == n2 { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-10, "{scheme} {n} {n2} {m}: {v}");
                }
            }
        }
    }
}

#[test]
fn table_examples() {
    let s00 = BasisState::new(0, 0);
    let s10 = BasisState::new(1, 0);
    assert!((radial_quadrature(QuantScheme::TwoDEven, 2, s00, s00, K) - 1.0 / K).abs() < 1e-12);
    assert!((radial_quadrature(QuantScheme::TwoDEven, 2, s10, s00, K) + 1.0 / K).abs() < 1e-12);
    for mu in 0..5u32 {
        let m = mu as f64;
        let want = K.powf(-1.5) * ((3.0 * m + 4.5) * (3.0 * m + 3.5) * (3.0 * m + 2.5)).sqrt();
        let got = radial_quadrature(QuantScheme::FiveD, 3, BasisState::new(0, mu + 1), BasisState::new(0, mu), K);
        assert!((got - want).abs() < 1e-8 * want);
    }
}

#[test]
fn angular_elements_match_quadrature() {
    let cos3 = |g: f64| (3.0 * g).cos();
    for scheme in QuantScheme::ALL {
        for m in scheme.min_m()..=10 {
            for m2 in scheme.min_m()..=11 {
                let oracle = angular_quadrature(scheme, m2, m, cos3);
                let formula = angular_element(scheme, m2, m);
                assert!((oracle - formula).abs() < 1e-12, "{scheme} {m2} {m}: {formula} vs {oracle}");
            }
        }
    }
    assert!((angular_quadrature(QuantScheme::TwoDEven, 1, 0, cos3) - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((angular_quadrature(QuantScheme::FiveD, 1, 0, cos3) - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    assert!((angular_quadrature(QuantScheme::TwoDOdd, 2, 1, cos3) - 0.5).abs() < 1e-12);
}

#[test]
fn angular_functions_are_orthonormal() {
    for scheme in QuantScheme::ALL {
        for m in scheme.min_m()..=10 {
            for m2 in scheme.min_m()..=10 {
                let v = angular_quadrature(scheme, m2, m, |_| 1.0);
                let want = if m == m2 { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "{scheme} {m} {m2}: {v}");
            }
        }
    }
}

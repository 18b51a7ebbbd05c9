use std::f64::consts::PI;

use gcm_core::band::BandedSymmetricMatrix;
use gcm_core::basis::{enumerate_states, BasisSpec, QuantScheme};
use gcm_core::classical::{hamiltonian_value, integrate, ClassicalConfig, PhasePoint};
use gcm_core::eigensolver::{eigenvalues, Spectrum};
use gcm_core::hamiltonian::{assemble, structural_bandwidth};
use gcm_core::model::{potential_xy, ModelParams};
use gcm_core::pipeline::commands::pearson;
use gcm_core::pipeline::io::{decode_matrix, decode_spectrum, encode_matrix, encode_spectrum};
use gcm_core::pipeline::RunConfig;
use gcm_core::spectral_stats::{brody_cdf, unfold_levels};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn scheme() -> impl Strategy<Value = QuantScheme> {
    prop_oneof![Just(QuantScheme::TwoDEven), Just(QuantScheme::TwoDOdd), Just(QuantScheme::FiveD)]
}

fn params() -> impl Strategy<Value = ModelParams> {
    (-2.0..2.0f64, -1.5..1.5f64, 0.2..2.0f64, 0.5..2.0f64, 0.02..0.3f64)
        .prop_map(|(a, b, c, k, h)| ModelParams::new(a, b, c, k, h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_has_threefold_symmetry(p in params(), r in 0.0..2.0f64, g in 0.0..(2.0 * PI)) {
        let v = potential_xy(&p, r * g.cos(), r * g.sin());
        for turn in [2.0 * PI / 3.0, 4.0 * PI / 3.0] {
            let w = potential_xy(&p, r * (g + turn).cos(), r * (g + turn).sin());
            prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
        }
        let mirror = potential_xy(&p, r * g.cos(), -r * g.sin());
        prop_assert!((v - mirror).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn enumeration_is_nested(s in scheme(), d in 1usize..400, extra in 0usize..400) {
        let small = enumerate_states(s, d);
        let large = enumerate_states(s, d + extra);
        prop_assert_eq!(small.len(), d);
        prop_assert_eq!(&large[..d], &small[..]);
        prop_assert!(small.windows(2).all(|w| w[0].quanta() <= w[1].quanta()));
        prop_assert!(small.iter().all(|st| st.is_valid_for(s)));
    }

    #[test]
    fn assembled_matrix_respects_structure(p in params(), s in scheme(), d in 5usize..250, a in 0.3..3.0f64) {
        let spec = BasisSpec::for_params(s, a, &p, d).unwrap();
        let m = assemble(&p, &spec).unwrap();
        let states = enumerate_states(s, d);
        prop_assert_eq!(m.dim(), d);
        prop_assert!(m.occupied_bandwidth() <= structural_bandwidth(&states));
        for i in 0..d {
            for j in 0..d {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn band_eigenvalues_match_dense(n in 2usize..40, kd in 0usize..6, seed in any::<u64>()) {
        let kd = kd.min(n - 1);
        let mut m = BandedSymmetricMatrix::zeros(n, kd);
        let mut x = seed | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kd)..=i {
                let v = next();
                m.set(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let got = eigenvalues(&m).unwrap();
        let mut want: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().cloned().collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12 * n as f64);
        }
        prop_assert!((got.iter().sum::<f64>() - m.trace()).abs() < 1e-12 * n as f64);
    }

    #[test]
    fn unfolded_spacings_have_unit_mean(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut e: Vec<f64> = (0..400).map(|_| rng.random::<f64>() * 10.0).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let u = unfold_levels(&e, 5).unwrap();
        let mean = u.spacings.iter().sum::<f64>() / u.spacings.len() as f64;
        prop_assert!((mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brody_cdf_is_a_distribution(w in 0.0..1.0f64, s in 0.0..5.0f64, ds in 0.0..1.0f64) {
        let (a, b) = (brody_cdf(s, w), brody_cdf(s + ds, w));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
        prop_assert_eq!(brody_cdf(0.0, w), 0.0);
    }

    #[test]
    fn pearson_is_bounded(v in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..50)) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
        let r = pearson(&a, &b);
        prop_assert!(r.is_nan() || (-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        let r_self = pearson(&a, &a);
        prop_assert!(r_self.is_nan() || (r_self - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_cache_round_trips(p in params(), s in scheme(), levels in prop::collection::vec(-100.0..100.0f64, 1..200)) {
        let spec = Spectrum::from_levels(s, p, levels);
        let back = decode_spectrum(&encode_spectrum(&spec)).unwrap();
        prop_assert_eq!(&back.levels, &spec.levels);
        prop_assert_eq!(back.scheme, spec.scheme);
        prop_assert_eq!(back.params, spec.params);
        prop_assert_eq!(back.converged_count, spec.converged_count);
    }

    #[test]
    fn matrix_cache_round_trips(p in params(), s in scheme(), d in 2usize..60) {
        let spec = BasisSpec::for_params(s, 1.1, &p, d).unwrap();
        let m = assemble(&p, &spec).unwrap();
        let (back, s2, p2, a) = decode_matrix(&encode_matrix(&m, s, &p, 1.1)).unwrap();
        prop_assert_eq!(back, m);
        prop_assert_eq!(s2, s);
        prop_assert_eq!(p2, p);
        prop_assert_eq!(a, 1.1);
    }

    #[test]
    fn config_round_trips(b in -2.0..2.0f64, kappa in 1e-5..1e-1f64, bin in 2usize..5000, seed in any::<u64>()) {
        let text = format!("[model]\nA = -1.0\nB = {b:?}\nkappa = {kappa:?}\n[stats]\nbin_size = {bin}\nseed = {seed}\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(cfg.hash(), again.hash());
        prop_assert_eq!(cfg, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integration_conserves_energy(b in 0.0..1.5f64, x in -0.5..0.5f64, px in -0.3..0.3f64) {
        let p = ModelParams::with_kappa(-1.0, b, 1.0, 25e-4).unwrap();
        let start = PhasePoint::new(x, 0.1, px, 0.2);
        let cfg = ClassicalConfig::default();
        let tr = integrate(&start, &p, 200.0, &cfg).unwrap();
        let e0 = hamiltonian_value(&start, &p);
        let last = tr.samples.last().unwrap().1;
        prop_assert!(tr.max_drift < 1e-9);
        prop_assert!((hamiltonian_value(&last, &p) - e0).abs() <= 1e-9 * e0.abs().max(1.0));
    }
}

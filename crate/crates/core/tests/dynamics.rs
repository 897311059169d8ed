use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvrelax::dynamics::{
    difference_curve, evolve, evolve_from, extract_rates, simulate_experiment, synthetic_dataset, DynamicsError,
    ProtocolSpec, RateMatrix, ReadoutModel, SpinState, TruthPoint, SUPPORTED_PAIRINGS,
};
use nvrelax::fitting::{fit, FitProblem, RateModelKind};
use nvrelax::models::{eval_n_mode, NModeParams};

use SpinState::{Minus, Plus, Zero};

#[test]
fn eigenvalues_match_closed_form_for_random_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let omega = 10f64.powf(rng.random_range(-1.0..3.5));
        let gamma = 10f64.powf(rng.random_range(-1.0..3.5));
        let m = RateMatrix::new(omega, gamma).unwrap();
        let mut numeric: Vec<f64> = m.generator().symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut exact = m.eigenvalues().to_vec();
        numeric.sort_by(f64::total_cmp);
        exact.sort_by(f64::total_cmp);
        let mut expected = vec![0.0, -3.0 * omega, -(omega + 2.0 * gamma)];
        expected.sort_by(f64::total_cmp);
        for ((n, e), x) in numeric.iter().zip(&exact).zip(&expected) {
            assert!((n - x).abs() < 1e-10 * omega.max(gamma), "{n} vs {x}");
            assert_eq!(e, x);
        }
    }
}

#[test]
fn closed_form_matches_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let m = RateMatrix::new(rng.random_range(0.1..200.0), rng.random_range(0.1..400.0)).unwrap();
        let tau = rng.random_range(0.0..0.02);
        let propagator = (m.generator() * tau).exp();
        for init in SpinState::ALL {
            let mut e = Vector3::zeros();
            e[init.index()] = 1.0;
            let numeric = propagator * e;
            let closed = evolve(&m, init, tau).unwrap();
            for k in 0..3 {
                assert!((numeric[k] - closed[k]).abs() < 1e-12, "{init} {k}: {} vs {}", numeric[k], closed[k]);
            }
        }
    }
}

#[test]
fn difference_curves_are_single_exponentials() {
    let m = RateMatrix::new(60.0, 128.0).unwrap();
    let taus: Vec<f64> = (0..50).map(|i| i as f64 * 2e-4).collect();
    for (init, pair) in SUPPORTED_PAIRINGS {
        let rate = if init == Zero { 180.0 } else { 316.0 };
        let sign = if init == Zero || pair.0 == init { 1.0 } else { -1.0 };
        let d = difference_curve(&m, init, pair, &taus).unwrap();
        for (t, v) in taus.iter().zip(&d) {
            assert!((v - sign * (-rate * t).exp()).abs() < 1e-12, "{init} {pair:?} at {t}");
        }
    }
    assert!(matches!(
        difference_curve(&m, Zero, (Minus, Plus), &taus),
        Err(DynamicsError::UnsupportedPairing { .. })
    ));
}

#[test]
fn noise_free_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (omega, gamma) = (rng.random_range(1.0..500.0), rng.random_range(1.0..800.0));
        let m = RateMatrix::new(omega, gamma).unwrap();
        let spec = ProtocolSpec::noise_free(ProtocolSpec::default_taus(&m, 20));
        let ex = extract_rates(&simulate_experiment(&m, &spec).unwrap()).unwrap();
        assert!((ex.omega / omega - 1.0).abs() < 1e-9);
        assert!((ex.gamma / gamma - 1.0).abs() < 1e-9);
        assert!(!ex.negative_gamma);
    }
}

#[test]
fn alternative_pairings_give_the_same_rates() {
    let m = RateMatrix::new(40.0, 90.0).unwrap();
    let mut spec = ProtocolSpec::noise_free(ProtocolSpec::default_taus(&m, 15));
    spec.pairings = [(Zero, (Zero, Minus)), (Minus, (Minus, Plus))];
    let ex = extract_rates(&simulate_experiment(&m, &spec).unwrap()).unwrap();
    assert!((ex.omega - 40.0).abs() < 1e-8 && (ex.gamma - 90.0).abs() < 1e-8);
}

#[test]
fn imperfect_readout_is_calibrated_out() {
    let m = RateMatrix::new(60.0, 128.0).unwrap();
    let mut spec = ProtocolSpec::noise_free(ProtocolSpec::default_taus(&m, 20));
    spec.readout = ReadoutModel { bright: 0.9, dark: 0.3 };
    let ex = extract_rates(&simulate_experiment(&m, &spec).unwrap()).unwrap();
    assert!((ex.omega - 60.0).abs() < 1e-8 && (ex.gamma - 128.0).abs() < 1e-8);
}

#[test]
fn large_shot_counts_converge_to_truth() {
    let m = RateMatrix::new(60.0, 128.0).unwrap();
    let spec = ProtocolSpec::with_shots(ProtocolSpec::default_taus(&m, 20), 10_000_000, 42);
    let ex = extract_rates(&simulate_experiment(&m, &spec).unwrap()).unwrap();
    assert!((ex.omega / 60.0 - 1.0).abs() < 5e-3, "{ex:?}");
    assert!((ex.gamma / 128.0 - 1.0).abs() < 5e-3, "{ex:?}");
}

#[test]
fn quoted_errors_cover_the_truth() {
    let m = RateMatrix::new(60.0, 128.0).unwrap();
    let taus = ProtocolSpec::default_taus(&m, 20);
    let runs = 100;
    let (mut in1, mut in3) = (0, 0);
    for seed in 0..runs {
        let ex = extract_rates(&simulate_experiment(&m, &ProtocolSpec::with_shots(taus.clone(), 100_000, seed)).unwrap())
            .unwrap();
        let zo = (ex.omega - 60.0).abs() / ex.omega_err;
        let zg = (ex.gamma - 128.0).abs() / ex.gamma_err;
        in1 += (zo <= 1.0) as usize + (zg <= 1.0) as usize;
        in3 += (zo <= 3.0) as usize + (zg <= 3.0) as usize;
    }
    // 200 draws; nominal 68.3% and 99.7%
    assert!((110..=160).contains(&in1), "{in1} of 200 within 1σ");
    assert!(in3 >= 194, "{in3} of 200 within 3σ");
}

#[test]
fn seeded_simulation_is_reproducible() {
    let m = RateMatrix::new(60.0, 128.0).unwrap();
    let spec = ProtocolSpec::with_shots(ProtocolSpec::default_taus(&m, 12), 5_000, 77);
    let (a, b) = (simulate_experiment(&m, &spec).unwrap(), simulate_experiment(&m, &spec).unwrap());
    assert_eq!(a, b);
    let other = ProtocolSpec { seed: 78, ..spec };
    assert_ne!(simulate_experiment(&m, &other).unwrap(), a);
}

#[test]
fn protocol_validation() {
    let m = RateMatrix::new(60.0, 128.0).unwrap();
    let mut spec = ProtocolSpec::noise_free(vec![0.0, 1e-3]);
    spec.pairings = [(Zero, (Zero, Plus)), (Zero, (Zero, Minus))];
    assert!(matches!(simulate_experiment(&m, &spec), Err(DynamicsError::InvalidProtocol(_))));
    assert!(RateMatrix::new(-1.0, 1.0).is_err());
    assert!(evolve(&m, Zero, -1.0).is_err());
    assert!(matches!("2".parse::<SpinState>(), Err(DynamicsError::UnknownState(_))));
    assert!(matches!(extract_rates(&[]), Err(DynamicsError::MissingCurve(_))));
}

#[test]
fn simulated_dataset_refits_to_generating_law() {
    let law = NModeParams::published_two_mode().phonon_limited();
    let truth: Vec<_> = (0..12)
        .map(|i| {
            let t = 150.0 + 30.0 * i as f64;
            let r = eval_n_mode(&law, None, t).unwrap();
            TruthPoint { nv_id: "sim".into(), sample: "S".into(), temperature: t, omega: r.omega, gamma: r.gamma }
        })
        .collect();
    let rates = RateMatrix::new(60.0, 128.0).unwrap();
    let spec = ProtocolSpec::with_shots(ProtocolSpec::default_taus(&rates, 20), 10_000_000, 1);
    let data = synthetic_dataset(&truth, &spec).unwrap();
    assert_eq!(data.len(), 12);
    let problem = FitProblem::new(data, RateModelKind::NMode { modes: 2 })
        .with_constants(nvrelax::fitting::ConstantsMode::FixedZero)
        .with_multistart(4);
    let r = fit(&problem).unwrap();
    assert!((r.deltas()[0] - 68.2).abs() < 3.0 * r.param("Delta1").unwrap().1 + 0.5, "{:?}", r.deltas());
    assert!(r.chi2_reduced < 5.0, "{}", r.chi2_reduced);
}

proptest! {
    #[test]
    fn populations_stay_normalized_and_relax_to_uniform(
        omega in 0.0f64..1e3, gamma in 0.0f64..1e3, tau in 0.0f64..1.0,
        p0 in 0.0f64..1.0, p1 in 0.0f64..1.0,
    ) {
        prop_assume!(p0 + p1 <= 1.0);
        let m = RateMatrix::new(omega, gamma).unwrap();
        let p = evolve_from(&m, [p0, p1, 1.0 - p0 - p1], tau).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(p.iter().all(|x| *x >= -1e-15 && *x <= 1.0 + 1e-15));
        if omega > 1.0 && gamma > 1.0 {
            let late = evolve_from(&m, [p0, p1, 1.0 - p0 - p1], 100.0).unwrap();
            prop_assert!(late.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
        }
    }

    #[test]
    fn evolution_composes(omega in 0.1f64..500.0, gamma in 0.1f64..500.0, a in 0.0f64..0.01, b in 0.0f64..0.01) {
        let m = RateMatrix::new(omega, gamma).unwrap();
        let direct = evolve(&m, Plus, a + b).unwrap();
        let stepped = evolve_from(&m, evolve(&m, Plus, a).unwrap(), b).unwrap();
        for k in 0..3 {
            prop_assert!((direct[k] - stepped[k]).abs() < 1e-14);
        }
    }
}

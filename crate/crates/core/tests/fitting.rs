mod common;

use common::{rel, synthetic_dataset};
use nalgebra::DMatrix;
use proptest::prelude::*;

use nvrelax::dataset::{Dataset, RateMeasurement};
use nvrelax::fitting::diagnostics::mean_variance;
use nvrelax::fitting::lm::finite_difference_jacobian;
use nvrelax::fitting::{
    compare_models, fit, residual_diagnostics, ConstantsMode, FitError, FitProblem, FitReport, LeastSquares,
    RateModelKind, RateObjective,
};

const TWO: RateModelKind = RateModelKind::NMode { modes: 2 };

fn quick(data: Dataset, model: RateModelKind) -> FitProblem {
    FitProblem::new(data, model).with_multistart(3)
}

#[test]
fn builtin_two_mode_fit_matches_reference_values() {
    let r = fit(&FitProblem::new(Dataset::builtin(), TWO)).unwrap();
    assert!(r.converged);
    let d = r.deltas();
    assert!((d[0] - 68.2).abs() < 1.0, "{d:?}");
    assert!((d[1] - 167.0).abs() < 5.0, "{d:?}");
    assert!((1.1..=1.5).contains(&r.chi2_reduced));
    assert_eq!(r.dof, r.residuals.len() - r.params.len());
    let (mean, var) = mean_variance(&r.normalized_residuals());
    assert!(mean.abs() < 0.2 && (0.8..=1.6).contains(&var));
}

#[test]
fn phonon_limited_fit_drops_constants_and_cold_rows() {
    let p = FitProblem::new(Dataset::builtin(), TWO).phonon_limited();
    let r = fit(&p).unwrap();
    assert_eq!(r.params.len(), 6);
    assert!(r.residuals.iter().all(|e| e.temperature >= 125.0));
    assert!(r.param_names.iter().all(|n| !n.contains('[')));
}

#[test]
fn zero_noise_recovers_generating_parameters() {
    let r = fit(&FitProblem::new(synthetic_dataset(0.0), TWO).with_multistart(4)).unwrap();
    let truth = [580.0, 1510.0, 68.2, 9000.0, 4800.0, 167.0, 0.013, 0.06, 0.010, 0.30];
    for ((name, p), t) in r.param_names.iter().zip(&r.params).zip(truth) {
        assert!(rel(*p, t) < 1e-6, "{name}: {p} vs {t}");
    }
    assert!(r.chi2 < 1e-12);
}

#[test]
fn final_objective_never_exceeds_any_start() {
    let r = fit(&quick(synthetic_dataset(0.03), TWO)).unwrap();
    for s in &r.starts {
        assert!(s.final_chi2 <= s.initial_chi2);
        assert!(r.chi2 <= s.final_chi2);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let data = synthetic_dataset(0.02);
    let cases: [(RateModelKind, Vec<f64>); 4] = [
        (RateModelKind::NMode { modes: 1 }, vec![900.0, 2000.0, 80.0, 0.02, 0.05, 0.01, 0.2]),
        (TWO, vec![580.0, 1510.0, 68.2, 9000.0, 4800.0, 167.0, 0.013, 0.06, 0.010, 0.30]),
        (
            RateModelKind::NMode { modes: 3 },
            vec![300.0, 900.0, 50.0, 600.0, 1500.0, 90.0, 9000.0, 4800.0, 170.0, 0.01, 0.05, 0.02, 0.3],
        ),
        (RateModelKind::Prior, vec![600.0, 1500.0, 70.0, 1e-9, 2e-9, 0.01, 0.06, 0.01, 0.3]),
    ];
    for (kind, p) in cases {
        let obj = RateObjective::new(&data, kind, ConstantsMode::PerSample);
        assert_eq!(obj.n_params(), p.len(), "{kind}");
        let mut analytic = DMatrix::zeros(obj.n_residuals(), obj.n_params());
        obj.jacobian(&p, &mut analytic);
        let numeric = finite_difference_jacobian(&obj, &p);
        for j in 0..p.len() {
            let err = (analytic.column(j) - numeric.column(j)).norm() / analytic.column(j).norm();
            assert!(err < 1e-5, "{kind} column {j}: {err:e}");
        }
    }
}

#[test]
fn seeded_fits_are_bitwise_reproducible() {
    let p = quick(synthetic_dataset(0.03), TWO).with_seed(99);
    let (a, b) = (fit(&p).unwrap(), fit(&p).unwrap());
    assert_eq!(a.params, b.params);
    assert_eq!(a.chi2.to_bits(), b.chi2.to_bits());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn result_does_not_depend_on_thread_count() {
    let p = quick(synthetic_dataset(0.03), TWO);
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| fit(&p).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.params, four.params);
    assert_eq!(one.chi2.to_bits(), four.chi2.to_bits());
}

#[test]
fn swapped_mode_labels_give_the_same_fit() {
    let data = synthetic_dataset(0.03);
    let ordered = vec![580.0, 1510.0, 68.2, 9000.0, 4800.0, 167.0, 0.013, 0.06, 0.010, 0.30];
    let swapped = vec![9000.0, 4800.0, 167.0, 580.0, 1510.0, 68.2, 0.013, 0.06, 0.010, 0.30];
    let a = fit(&FitProblem::new(data.clone(), TWO).with_multistart(1).with_initial_guess(ordered)).unwrap();
    let b = fit(&FitProblem::new(data, TWO).with_multistart(1).with_initial_guess(swapped)).unwrap();
    assert!(a.deltas()[0] < a.deltas()[1] && b.deltas()[0] < b.deltas()[1]);
    for (x, y) in a.params.iter().zip(&b.params) {
        assert!(rel(*x, *y) < 1e-6, "{x} vs {y}");
    }
    assert!(rel(a.chi2, b.chi2) < 1e-9);
}

#[test]
fn model_ladder_orders_by_flexibility() {
    let data = Dataset::builtin();
    let fits: Vec<_> = [
        RateModelKind::NMode { modes: 1 },
        TWO,
        RateModelKind::NMode { modes: 3 },
        RateModelKind::Prior,
    ]
    .into_iter()
    .map(|m| fit(&FitProblem::new(data.clone(), m)).unwrap())
    .collect();
    assert!((3.4..=4.4).contains(&fits[0].chi2_reduced));
    assert!(fits[2].chi2 <= fits[1].chi2 && fits[1].chi2 <= fits[0].chi2);
    assert!(fits[3].chi2_reduced >= fits[1].chi2_reduced);
    let ranking = compare_models(&fits).unwrap();
    assert_eq!(ranking.entries.len(), 4);
    assert!(ranking.entries.windows(2).all(|w| w[0].chi2_reduced <= w[1].chi2_reduced));
    assert_eq!(ranking.entries[0].delta_from_best, 0.0);
}

#[test]
fn compare_rejects_fits_on_different_data() {
    let a = fit(&quick(synthetic_dataset(0.03), TWO)).unwrap();
    let b = fit(&quick(synthetic_dataset(0.01), TWO)).unwrap();
    assert!(matches!(compare_models(&[a, b]), Err(FitError::DatasetMismatch { .. })));
    assert!(matches!(compare_models(&[]), Err(FitError::InvalidProblem(_))));
}

#[test]
fn underdetermined_problem_is_rejected() {
    let rows = vec![
        RateMeasurement::new("x", "A", 100.0, (1.0, 0.1), (2.0, 0.1)).unwrap(),
        RateMeasurement::new("x", "A", 200.0, (5.0, 0.1), (9.0, 0.1)).unwrap(),
    ];
    let data = Dataset::new(rows, "tiny").unwrap();
    assert!(matches!(fit(&FitProblem::new(data, TWO)), Err(FitError::InvalidProblem(_))));
}

#[test]
fn degenerate_sample_constants_are_reported_as_rank_deficient() {
    // every row hot enough that the constant floor is invisible next to the phonon rates
    let params = nvrelax::models::NModeParams::published_two_mode();
    let rows = (0..12)
        .map(|i| {
            let t = 2000.0 + 100.0 * i as f64;
            let r = nvrelax::models::eval_n_mode(&params, None, t).unwrap();
            RateMeasurement::new("x", "A", t, (r.omega, 1e-3 * r.omega), (r.gamma, 1e-3 * r.gamma)).unwrap()
        })
        .collect();
    let data = Dataset::new(rows, "hot").unwrap();
    match fit(&FitProblem::new(data, TWO).with_multistart(2)) {
        Err(FitError::RankDeficient { first, second, .. }) => assert_ne!(first, second),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn report_round_trips_through_json() {
    let p = quick(synthetic_dataset(0.03), TWO);
    let r = fit(&p).unwrap();
    let report = FitReport::new(&p, r, "synthetic");
    let back = FitReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back.to_json(), report.to_json());
    assert_eq!(back.parameters.len(), 10);
}

#[test]
fn residual_diagnostics_summarize_the_fit() {
    let r = fit(&FitProblem::new(Dataset::builtin(), TWO)).unwrap();
    let d = residual_diagnostics(&r, 0.5);
    assert_eq!(d.count, r.residuals.len());
    assert_eq!(d.histogram.iter().map(|b| b.count).sum::<usize>(), d.count);
    assert!(d.outliers.iter().all(|o| o.normalized.abs() > 2.5));
}

fn permuted(data: &Dataset, order: &[usize]) -> Dataset {
    let rows = order.iter().map(|&i| data.rows()[i].clone()).collect();
    Dataset::new(rows, data.provenance.clone()).unwrap()
}

fn sorted_residuals(r: &nvrelax::FitResult) -> Vec<f64> {
    let mut v = r.normalized_residuals();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn row_order_does_not_change_the_fit(seed in any::<u64>()) {
        let data = synthetic_dataset(0.03);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = fit(&quick(data.clone(), TWO)).unwrap();
        let b = fit(&quick(permuted(&data, &order), TWO)).unwrap();
        prop_assert_eq!(&a.dataset_checksum, &b.dataset_checksum);
        prop_assert!(rel(a.chi2, b.chi2) < 1e-8);
        for (x, y) in a.params.iter().zip(&b.params) {
            prop_assert!(rel(*x, *y) < 1e-5, "{} vs {}", x, y);
        }
        for (x, y) in sorted_residuals(&a).iter().zip(&sorted_residuals(&b)) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn rescaling_rates_and_errors_rescales_only_coefficients(c in 0.2f64..5.0) {
        let data = synthetic_dataset(0.03);
        let rows = data
            .rows()
            .iter()
            .map(|r| {
                RateMeasurement::new(
                    r.nv_id.clone(),
                    r.sample.clone(),
                    r.temperature,
                    (c * r.omega, c * r.omega_err),
                    (c * r.gamma, c * r.gamma_err),
                )
                .unwrap()
            })
            .collect();
        let scaled = Dataset::new(rows, "scaled").unwrap();
        let a = fit(&quick(data, TWO)).unwrap();
        let b = fit(&quick(scaled, TWO)).unwrap();
        prop_assert!(rel(a.chi2_reduced, b.chi2_reduced) < 1e-7);
        for (x, y) in a.normalized_residuals().iter().zip(&b.normalized_residuals()) {
            prop_assert!((x - y).abs() < 1e-5);
        }
        for (name, (x, y)) in a.param_names.iter().zip(a.params.iter().zip(&b.params)) {
            let expected = if name.starts_with("Delta") { *x } else { c * x };
            prop_assert!(rel(expected, *y) < 1e-5, "{}: {} vs {}", name, expected, y);
        }
    }

    #[test]
    fn inflating_errors_divides_chi2(c in 1.1f64..10.0) {
        let data = synthetic_dataset(0.03);
        let rows = data
            .rows()
            .iter()
            .map(|r| {
                RateMeasurement::new(
                    r.nv_id.clone(),
                    r.sample.clone(),
                    r.temperature,
                    (r.omega, c * r.omega_err),
                    (r.gamma, c * r.gamma_err),
                )
                .unwrap()
            })
            .collect();
        let loose = Dataset::new(rows, "loose").unwrap();
        let a = fit(&quick(data, TWO)).unwrap();
        let b = fit(&quick(loose, TWO)).unwrap();
        prop_assert!(rel(a.chi2, b.chi2 * c * c) < 1e-6);
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            prop_assert!(rel(c * x, *y) < 1e-3);
        }
    }
}

use std::collections::BTreeMap;

use proptest::prelude::*;

use nvrelax::dataset::{parse_csv, Dataset, DatasetError, RateMeasurement};
use nvrelax::models::{
    coherence_limits, eval_n_mode, eval_prior_model, occupation, orbach_factor, ratio_curve, Mode, ModelError,
    NModeParams, PriorModelParams, RateModelParams,
};
use nvrelax::units::BOLTZMANN_MEV_PER_K;

#[test]
fn published_parameters_at_room_temperature() {
    let p = NModeParams::published_two_mode();
    let r = eval_n_mode(&p, Some("A"), 295.0).unwrap();
    assert!((r.omega - 58.5).abs() < 1.0, "{r:?}");
    let c = coherence_limits(r.omega, r.gamma);
    assert!((c.t2_sq - 6.6e-3).abs() < 0.2e-3, "{c:?}");
    assert!(matches!(eval_n_mode(&p, Some("Z"), 295.0), Err(ModelError::UnknownSample(s)) if s == "Z"));
}

#[test]
fn zero_rates_give_unbounded_coherence() {
    let c = coherence_limits(0.0, 0.0);
    assert!(c.is_unbounded() && c.t1.is_infinite());
    let d = coherence_limits(0.0, 5.0);
    assert_eq!(d.t2_dq, 0.2);
    assert!(d.t1.is_infinite());
}

#[test]
fn ratio_curve_flags_zero_omega() {
    let p = RateModelParams::NMode(NModeParams::published_two_mode());
    let pts = ratio_curve(&p, None, &[0.5, 300.0]).unwrap();
    assert!(matches!(pts[0].ratio, Err(ModelError::ZeroOmega { .. })));
    assert!(pts[1].ratio.is_ok());
}

#[test]
fn parameter_validation() {
    let bad = Mode { delta: -1.0, a: 1.0, b: 1.0 };
    assert!(NModeParams::new(vec![bad], BTreeMap::new()).is_err());
    let m = Mode { delta: 50.0, a: 1.0, b: 1.0 };
    assert!(NModeParams::new(vec![m; 4], BTreeMap::new()).is_err());
    let sorted = NModeParams::new(vec![Mode { delta: 150.0, ..m }, m], BTreeMap::new()).unwrap();
    assert!(sorted.modes[0].delta < sorted.modes[1].delta);
}

#[test]
fn builtin_table_has_both_samples() {
    let d = Dataset::builtin();
    assert_eq!(d.samples(), vec!["A".to_string(), "B".to_string()]);
    assert_eq!(d.len(), 53);
    let (lo, hi) = d.temperature_range();
    assert!(lo < 10.0 && hi > 470.0);
}

#[test]
fn csv_errors_name_the_physical_line() {
    let text = "# comment\nnv_id,sample,temperature_k,omega_s,omega_err_s,gamma_s,gamma_err_s\n\nA1,A,300,60,1,120,2\nA1,A,abc,60,1,120,2\n";
    match parse_csv(text, "t") {
        Err(DatasetError::Parse { line, .. }) | Err(DatasetError::Validation { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
    let neg = "nv_id,sample,temperature_k,omega_s,omega_err_s,gamma_s,gamma_err_s\nA1,A,300,60,0,120,2\n";
    assert!(parse_csv(neg, "t").is_err());
    assert!(matches!(parse_csv("nv_id,sample,temperature_k,omega_s,omega_err_s,gamma_s,gamma_err_s\n", "t"), Err(DatasetError::Empty)));
}

#[test]
fn content_checksum_ignores_row_order() {
    let d = Dataset::builtin();
    let mut rows = d.rows().to_vec();
    rows.reverse();
    let r = Dataset::new(rows, "reversed").unwrap();
    assert_eq!(d.content_checksum(), r.content_checksum());
    assert_ne!(d.checksum(), r.checksum());
}

proptest! {
    #[test]
    fn occupation_high_temperature_limit(delta in 0.1f64..300.0) {
        let t = 1e7;
        let x = delta / (BOLTZMANN_MEV_PER_K * t);
        // n = 1/x − 1/2 + x/12 + …
        prop_assert!(((occupation(delta, t) - (1.0 / x - 0.5)) * x).abs() < x * x);
    }

    #[test]
    fn occupation_low_temperature_limit(delta in 1.0f64..300.0, x in 20.0f64..600.0) {
        let t = delta / (BOLTZMANN_MEV_PER_K * x);
        let n = occupation(delta, t);
        prop_assert!((n / (-x).exp() - 1.0).abs() < 1e-8);
        prop_assert_eq!(occupation(delta, delta / (BOLTZMANN_MEV_PER_K * 701.0)), 0.0);
    }

    #[test]
    fn orbach_factor_is_n_times_n_plus_one(delta in 1.0f64..300.0, t in 5.0f64..2000.0) {
        let n = occupation(delta, t);
        let f = orbach_factor(delta, t);
        prop_assert!((f - n * (n + 1.0)).abs() <= 1e-12 * f.max(1e-300));
    }

    #[test]
    fn rates_increase_with_temperature(
        d1 in 10.0f64..120.0, d2 in 120.0f64..300.0,
        a in 0.0f64..1e4, b in 0.0f64..1e4, t in 1.0f64..1000.0, dt in 0.1f64..100.0,
    ) {
        let p = NModeParams::new(
            vec![Mode { delta: d1, a, b }, Mode { delta: d2, a: b, b: a }],
            BTreeMap::new(),
        ).unwrap();
        let (lo, hi) = (eval_n_mode(&p, None, t).unwrap(), eval_n_mode(&p, None, t + dt).unwrap());
        prop_assert!(hi.omega >= lo.omega && hi.gamma >= lo.gamma);

        let q = PriorModelParams { delta: d1, a1: a, b1: b, a2: 1e-10, b2: 2e-10, sample_constants: BTreeMap::new() };
        let (lo, hi) = (eval_prior_model(&q, None, t).unwrap(), eval_prior_model(&q, None, t + dt).unwrap());
        prop_assert!(hi.omega >= lo.omega && hi.gamma >= lo.gamma);
    }

    #[test]
    fn coherence_identities(omega in 0.0f64..1e5, gamma in 0.0f64..1e5) {
        prop_assume!(omega > 0.0);
        let c = coherence_limits(omega, gamma);
        prop_assert!((c.t1 * 3.0 * omega - 1.0).abs() < 1e-14);
        prop_assert!((c.t2_sq * (3.0 * omega + gamma) - 2.0).abs() < 1e-14);
        prop_assert!((c.t2_dq * (omega + gamma) - 1.0).abs() < 1e-14);
        prop_assert!(c.t2_sq <= 2.0 * c.t2_dq);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(
        ("[A-Z][a-z0-9]{0,4}", "[AB]", 1.0f64..2000.0, 0.0f64..1e6, 1e-6f64..1e3, 0.0f64..1e6, 1e-6f64..1e3),
        1..20,
    )) {
        let rows: Vec<_> = rows
            .into_iter()
            .map(|(id, s, t, o, oe, g, ge)| RateMeasurement::new(id, s, t, (o, oe), (g, ge)).unwrap())
            .collect();
        let d = Dataset::new(rows, "generated").unwrap();
        let back = parse_csv(&d.to_csv(), "generated").unwrap();
        prop_assert_eq!(back.rows(), d.rows());
        prop_assert_eq!(back.checksum(), d.checksum());
    }
}

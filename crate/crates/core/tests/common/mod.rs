#![allow(dead_code)]

use nvrelax::dataset::{Dataset, RateMeasurement};
use nvrelax::models::{eval_n_mode, NModeParams};

/// Rows generated from the published two-mode law for samples A and B, with
/// 5% errors and a deterministic ±`jitter` relative offset on every rate.
pub fn synthetic_dataset(jitter: f64) -> Dataset {
    let params = NModeParams::published_two_mode();
    let mut rows = Vec::new();
    for (k, t) in (0..16).map(|i| (i, 20.0 + 30.0 * i as f64)) {
        for sample in ["A", "B"] {
            let r = eval_n_mode(&params, Some(sample), t).unwrap();
            let s = if (k + sample.len() * 3) % 2 == 0 { 1.0 } else { -1.0 };
            let (o, g) = (r.omega * (1.0 + s * jitter), r.gamma * (1.0 - s * jitter * 0.7));
            rows.push(
                RateMeasurement::new(format!("{sample}{}", k % 3), sample, t, (o, 0.05 * o), (g, 0.05 * g)).unwrap(),
            );
        }
    }
    Dataset::new(rows, "synthetic").unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

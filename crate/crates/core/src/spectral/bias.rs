//! Synthetic two-peak spectral functions and the refit of rate curves they
//! produce, used to measure how far fitted activation energies fall below
//! the spectral peaks.

use super::{CouplingEntry, CouplingTable, RamanRateCurve, SpectralError};
use crate::channel::TransitionChannel;
use crate::dataset::{Dataset, RateMeasurement};
use crate::fitting::{fit, ConstantsMode, FitProblem, FitResult, RateModelKind};

/// Peak centers (meV) and relative weights of the fixture.
pub const FIXTURE_PEAKS: [(f64, f64); 2] = [(65.0, 1.0), (155.0, 1.5)];
/// Each peak is a symmetric cluster of modes at these offsets (meV) and weights.
const CLUSTER_OFFSETS: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];
const CLUSTER_WEIGHTS: [f64; 5] = [0.25, 0.6, 1.0, 0.6, 0.25];
/// Single-quantum couplings are the double-quantum ones scaled by this.
const SQ_SCALE: f64 = 0.5;

/// Second-order coupling table with mode clusters centered on 65 and 155 meV,
/// for both the single- and double-quantum channels.
pub fn two_peak_fixture() -> CouplingTable {
    let mut entries = Vec::new();
    for (channel, scale) in [(TransitionChannel::SingleQuantum, SQ_SCALE), (TransitionChannel::DoubleQuantum, 1.0)] {
        for (center, weight) in FIXTURE_PEAKS {
            for (off, w) in CLUSTER_OFFSETS.iter().zip(CLUSTER_WEIGHTS) {
                entries.push(CouplingEntry {
                    energy_mev: center + off,
                    amplitude_mhz: scale * weight * w,
                    channel,
                    order: 2,
                });
            }
        }
    }
    CouplingTable::new(entries)
}

/// 200 log-spaced temperatures from 100 to 5000 K.
pub fn bias_sweep_temperatures() -> Vec<f64> {
    let (lo, hi, n) = (100.0f64, 5000.0f64, 200);
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Fits the two-mode law without sample constants to a computed rate curve.
///
/// Points above `t_max` are dropped. Every rate gets a 1% relative error so
/// all temperatures carry equal weight on a log scale.
pub fn refit_ab_initio_curve(curve: &RamanRateCurve, t_max: f64) -> Result<FitResult, SpectralError> {
    let rows = (0..curve.len())
        .filter(|&i| curve.temperatures[i] <= t_max && curve.omega[i] > 0.0 && curve.gamma[i] > 0.0)
        .map(|i| {
            RateMeasurement::new(
                "computed",
                "computed",
                curve.temperatures[i],
                (curve.omega[i], 0.01 * curve.omega[i]),
                (curve.gamma[i], 0.01 * curve.gamma[i]),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let data = Dataset::new(rows, curve.provenance.clone())?;
    let problem = FitProblem::new(data, RateModelKind::NMode { modes: 2 }).with_constants(ConstantsMode::FixedZero);
    Ok(fit(&problem)?)
}

//! Closed-form rate laws for Ω(T) and γ(T).
//!
//! The N-mode law sums Orbach-like terms `c·n(Δ)[n(Δ)+1]` over effective
//! phonon modes plus a per-sample constant. The prior law keeps a single
//! Orbach-like term and adds a `T⁵` term.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::units::BOLTZMANN_MEV_PER_K;

/// Above this value of Δ/k_BT occupations are reported as exactly zero.
pub const OCCUPATION_CUTOFF: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown sample `{0}`; no sample-dependent constants are defined for it")]
    UnknownSample(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("omega is zero at {temperature} K; gamma/omega undefined")]
    ZeroOmega { temperature: f64 },
}

/// Bose–Einstein occupation `1/(exp(Δ/k_BT) − 1)`.
///
/// Returns exactly 0 when Δ/k_BT exceeds [`OCCUPATION_CUTOFF`].
pub fn occupation(delta_mev: f64, temperature_k: f64) -> f64 {
    let x = delta_mev / (BOLTZMANN_MEV_PER_K * temperature_k);
    if x > OCCUPATION_CUTOFF {
        return 0.0;
    }
    1.0 / x.exp_m1()
}

/// `n(n+1)` written as `e^{-x}/(1 − e^{-x})²` so it stays accurate from the
/// frozen-out limit up to `x → 0`.
pub fn orbach_factor(delta_mev: f64, temperature_k: f64) -> f64 {
    orbach_factor_x(delta_mev / (BOLTZMANN_MEV_PER_K * temperature_k))
}

pub(crate) fn orbach_factor_x(x: f64) -> f64 {
    if x > OCCUPATION_CUTOFF {
        return 0.0;
    }
    let d = -(-x).exp_m1();
    (-x).exp() / (d * d)
}

/// ∂[n(n+1)]/∂Δ at fixed temperature.
pub(crate) fn orbach_factor_ddelta(delta_mev: f64, temperature_k: f64) -> f64 {
    let kt = BOLTZMANN_MEV_PER_K * temperature_k;
    let x = delta_mev / kt;
    if x > OCCUPATION_CUTOFF {
        return 0.0;
    }
    let n = 1.0 / x.exp_m1();
    -orbach_factor_x(x) * (2.0 * n + 1.0) / kt
}

/// Ω and γ at one temperature, s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub omega: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleConstants {
    pub a3: f64,
    pub b3: f64,
}

/// One effective phonon mode: energy and its Ω / γ coupling coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub delta: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NModeParams {
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub sample_constants: BTreeMap<String, SampleConstants>,
}

impl NModeParams {
    /// Builds a parameter set, sorting modes by energy. Rejects negative
    /// coefficients, non-positive energies and more than three modes.
    pub fn new(
        mut modes: Vec<Mode>,
        sample_constants: BTreeMap<String, SampleConstants>,
    ) -> Result<Self, ModelError> {
        if modes.is_empty() || modes.len() > 3 {
            return Err(ModelError::InvalidParams(format!(
                "1 to 3 modes supported, got {}",
                modes.len()
            )));
        }
        for m in &modes {
            let nonneg = |x: f64| x >= 0.0;
            if !(m.delta.is_finite() && m.delta > 0.0 && nonneg(m.a) && nonneg(m.b)) {
                return Err(ModelError::InvalidParams(format!("bad mode {m:?}")));
            }
        }
        for (s, c) in &sample_constants {
            if !(c.a3 >= 0.0 && c.b3 >= 0.0) {
                return Err(ModelError::InvalidParams(format!("negative constant for sample {s}")));
            }
        }
        modes.sort_by(|x, y| x.delta.total_cmp(&y.delta));
        Ok(NModeParams { modes, sample_constants })
    }

    /// Two-mode parameters and sample constants reported for the measured
    /// table (samples A and B).
    pub fn published_two_mode() -> Self {
        let mut constants = BTreeMap::new();
        constants.insert("A".to_string(), SampleConstants { a3: 0.013, b3: 0.06 });
        constants.insert("B".to_string(), SampleConstants { a3: 0.010, b3: 0.30 });
        NModeParams {
            modes: vec![
                Mode { delta: 68.2, a: 580.0, b: 1510.0 },
                Mode { delta: 167.0, a: 9000.0, b: 4800.0 },
            ],
            sample_constants: constants,
        }
    }

    /// Same modes with every sample constant dropped.
    pub fn phonon_limited(&self) -> Self {
        NModeParams {
            modes: self.modes.clone(),
            sample_constants: BTreeMap::new(),
        }
    }
}

fn constants_for(
    table: &BTreeMap<String, SampleConstants>,
    sample: Option<&str>,
) -> Result<SampleConstants, ModelError> {
    match sample {
        None => Ok(SampleConstants::default()),
        Some(s) => table
            .get(s)
            .copied()
            .ok_or_else(|| ModelError::UnknownSample(s.to_string())),
    }
}

/// Evaluates the N-mode law. `sample = None` drops the sample constants
/// (phonon-limited curves).
pub fn eval_n_mode(params: &NModeParams, sample: Option<&str>, temperature: f64) -> Result<RatePair, ModelError> {
    let c = constants_for(&params.sample_constants, sample)?;
    let (mut omega, mut gamma) = (c.a3, c.b3);
    for m in &params.modes {
        let f = orbach_factor(m.delta, temperature);
        omega += m.a * f;
        gamma += m.b * f;
    }
    Ok(RatePair { omega, gamma })
}

/// Orbach-like term plus `T⁵` term plus sample constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorModelParams {
    pub delta: f64,
    pub a1: f64,
    pub b1: f64,
    /// s⁻¹·K⁻⁵
    pub a2: f64,
    /// s⁻¹·K⁻⁵
    pub b2: f64,
    #[serde(default)]
    pub sample_constants: BTreeMap<String, SampleConstants>,
}

pub fn eval_prior_model(
    params: &PriorModelParams,
    sample: Option<&str>,
    temperature: f64,
) -> Result<RatePair, ModelError> {
    let c = constants_for(&params.sample_constants, sample)?;
    let f = orbach_factor(params.delta, temperature);
    let t5 = temperature.powi(5);
    Ok(RatePair {
        omega: params.a1 * f + params.a2 * t5 + c.a3,
        gamma: params.b1 * f + params.b2 * t5 + c.b3,
    })
}

/// Either rate law, as stored in parameter files and fit reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum RateModelParams {
    NMode(NModeParams),
    Prior(PriorModelParams),
}

impl RateModelParams {
    pub fn eval(&self, sample: Option<&str>, temperature: f64) -> Result<RatePair, ModelError> {
        match self {
            RateModelParams::NMode(p) => eval_n_mode(p, sample, temperature),
            RateModelParams::Prior(p) => eval_prior_model(p, sample, temperature),
        }
    }

    pub fn sample_labels(&self) -> Vec<String> {
        let table = match self {
            RateModelParams::NMode(p) => &p.sample_constants,
            RateModelParams::Prior(p) => &p.sample_constants,
        };
        table.keys().cloned().collect()
    }
}

/// Relaxation-limited coherence times, seconds. Infinite when the rates
/// that bound them are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceLimit {
    pub t2_sq: f64,
    pub t2_dq: f64,
    pub t1: f64,
}

impl CoherenceLimit {
    pub fn is_unbounded(&self) -> bool {
        self.t2_sq.is_infinite() && self.t2_dq.is_infinite()
    }
}

/// `T2(SQ) = 2/(3Ω+γ)`, `T2(DQ) = 1/(Ω+γ)`, `T1 = 1/(3Ω)`.
///
/// Zero rates yield `f64::INFINITY` for the affected limits rather than an
/// error.
pub fn coherence_limits(omega: f64, gamma: f64) -> CoherenceLimit {
    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
    CoherenceLimit {
        t2_sq: 2.0 * inv(3.0 * omega + gamma),
        t2_dq: inv(omega + gamma),
        t1: inv(3.0 * omega),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioPoint {
    pub temperature: f64,
    pub ratio: Result<f64, ModelError>,
}

/// γ(T)/Ω(T) on a caller-supplied grid.
pub fn ratio_curve(params: &RateModelParams, sample: Option<&str>, t_grid: &[f64]) -> Result<Vec<RatioPoint>, ModelError> {
    t_grid
        .iter()
        .map(|&t| {
            let r = params.eval(sample, t)?;
            let ratio = if r.omega > 0.0 {
                Ok(r.gamma / r.omega)
            } else {
                Err(ModelError::ZeroOmega { temperature: t })
            };
            Ok(RatioPoint { temperature: t, ratio })
        })
        .collect()
}

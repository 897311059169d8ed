//! Three-level population dynamics of the spin triplet and the two-curve
//! protocol that separates Ω from γ.
//!
//! Populations are ordered `(P₀, P₋₁, P₊₁)`. The generator has eigenvalues
//! `0`, `−3Ω` and `−(Ω+2γ)` with eigenvectors `(1,1,1)`, `(2,−1,−1)` and
//! `(0,1,−1)`, so every solution is a closed-form sum of two exponentials.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetError, RateMeasurement};
use crate::fitting::covariance::estimate_covariance;
use crate::fitting::lm::{minimize, LeastSquares, LmConfig, ParamSpec};
use crate::fitting::FitError;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("rates must be finite and non-negative, got omega {omega}, gamma {gamma}")]
    InvalidRates { omega: f64, gamma: f64 },
    #[error("delay must be finite and non-negative, got {0} s")]
    InvalidTau(f64),
    #[error("unsupported pairing: init {init}, readout ({}, {}); supported: {}", .pair.0, .pair.1, supported_pairings())]
    UnsupportedPairing { init: SpinState, pair: (SpinState, SpinState) },
    #[error("unknown spin state `{0}` (expected 0, -1 or +1)")]
    UnknownState(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("missing the {0} difference curve")]
    MissingCurve(&'static str),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinState {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "+1")]
    Plus,
}

impl SpinState {
    pub const ALL: [SpinState; 3] = [SpinState::Zero, SpinState::Minus, SpinState::Plus];

    pub fn index(self) -> usize {
        match self {
            SpinState::Zero => 0,
            SpinState::Minus => 1,
            SpinState::Plus => 2,
        }
    }

    fn basis(self) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[self.index()] = 1.0;
        p
    }
}

impl fmt::Display for SpinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpinState::Zero => "0",
            SpinState::Minus => "-1",
            SpinState::Plus => "+1",
        })
    }
}

impl FromStr for SpinState {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0" => Ok(SpinState::Zero),
            "-1" | "-" => Ok(SpinState::Minus),
            "+1" | "1" | "+" => Ok(SpinState::Plus),
            other => Err(DynamicsError::UnknownState(other.to_string())),
        }
    }
}

/// `(init, (a, b))` combinations whose difference `P_a − P_b` is a single exponential.
pub const SUPPORTED_PAIRINGS: [(SpinState, (SpinState, SpinState)); 4] = [
    (SpinState::Zero, (SpinState::Zero, SpinState::Plus)),
    (SpinState::Zero, (SpinState::Zero, SpinState::Minus)),
    (SpinState::Plus, (SpinState::Plus, SpinState::Minus)),
    (SpinState::Minus, (SpinState::Minus, SpinState::Plus)),
];

/// The protocol's default curves: init 0 read as (0, +1), init +1 read as (+1, −1).
pub const STANDARD_PAIRINGS: [(SpinState, (SpinState, SpinState)); 2] = [
    (SpinState::Zero, (SpinState::Zero, SpinState::Plus)),
    (SpinState::Plus, (SpinState::Plus, SpinState::Minus)),
];

fn supported_pairings() -> String {
    SUPPORTED_PAIRINGS
        .iter()
        .map(|(i, (a, b))| format!("init {i} readout ({a}, {b})"))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    omega: f64,
    gamma: f64,
}

impl RateMatrix {
    pub fn new(omega: f64, gamma: f64) -> Result<Self, DynamicsError> {
        if !(omega.is_finite() && gamma.is_finite() && omega >= 0.0 && gamma >= 0.0) {
            return Err(DynamicsError::InvalidRates { omega, gamma });
        }
        Ok(RateMatrix { omega, gamma })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `dP/dt = G·P`. Columns sum to zero.
    pub fn generator(&self) -> Matrix3<f64> {
        let (o, g) = (self.omega, self.gamma);
        Matrix3::new(
            -2.0 * o, o, o, //
            o, -(o + g), g, //
            o, g, -(o + g),
        )
    }

    /// `[0, −3Ω, −(Ω+2γ)]`.
    pub fn eigenvalues(&self) -> [f64; 3] {
        [0.0, -3.0 * self.omega, -(self.omega + 2.0 * self.gamma)]
    }
}

/// Populations after `tau` seconds starting from `init`.
pub fn evolve(rates: &RateMatrix, init: SpinState, tau: f64) -> Result<[f64; 3], DynamicsError> {
    evolve_from(rates, init.basis(), tau)
}

/// Populations after `tau` seconds starting from an arbitrary distribution.
pub fn evolve_from(rates: &RateMatrix, p: [f64; 3], tau: f64) -> Result<[f64; 3], DynamicsError> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(DynamicsError::InvalidTau(tau));
    }
    let mean = (p[0] + p[1] + p[2]) / 3.0;
    let c1 = (2.0 * p[0] - p[1] - p[2]) / 6.0 * (-3.0 * rates.omega * tau).exp();
    let c2 = (p[1] - p[2]) / 2.0 * (-(rates.omega + 2.0 * rates.gamma) * tau).exp();
    Ok([mean + 2.0 * c1, mean - c1 + c2, mean - c1 - c2])
}

fn check_pairing(init: SpinState, pair: (SpinState, SpinState)) -> Result<(), DynamicsError> {
    if SUPPORTED_PAIRINGS.contains(&(init, pair)) {
        Ok(())
    } else {
        Err(DynamicsError::UnsupportedPairing { init, pair })
    }
}

/// `P_a(τ) − P_b(τ)` for a supported pairing, which equals `exp(−3Ωτ)` for
/// init 0 and `exp(−(Ω+2γ)τ)` for init ±1.
pub fn difference_curve(
    rates: &RateMatrix,
    init: SpinState,
    pair: (SpinState, SpinState),
    taus: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    check_pairing(init, pair)?;
    taus.iter()
        .map(|&t| {
            let p = evolve(rates, init, t)?;
            Ok(p[pair.0.index()] - p[pair.1.index()])
        })
        .collect()
}

/// Optical readout: a shot counts as bright with probability
/// `dark + (bright − dark)·P₀` after the readout state is mapped onto |0⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub bright: f64,
    pub dark: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        ReadoutModel { bright: 1.0, dark: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    /// Delays in seconds.
    pub taus: Vec<f64>,
    /// Shots per readout per delay; `None` gives noise-free curves.
    pub shots: Option<u64>,
    pub readout: ReadoutModel,
    pub seed: u64,
    /// One init-0 and one init-±1 curve.
    pub pairings: [(SpinState, (SpinState, SpinState)); 2],
}

impl ProtocolSpec {
    pub fn noise_free(taus: Vec<f64>) -> Self {
        ProtocolSpec {
            taus,
            shots: None,
            readout: ReadoutModel::default(),
            seed: 0,
            pairings: STANDARD_PAIRINGS,
        }
    }

    pub fn with_shots(taus: Vec<f64>, shots: u64, seed: u64) -> Self {
        ProtocolSpec {
            taus,
            shots: Some(shots),
            readout: ReadoutModel::default(),
            seed,
            pairings: STANDARD_PAIRINGS,
        }
    }

    /// `n` delays evenly spaced from 0 to about three decay times of the
    /// slower curve.
    pub fn default_taus(rates: &RateMatrix, n: usize) -> Vec<f64> {
        let slow = (3.0 * rates.omega).min(rates.omega + 2.0 * rates.gamma);
        let end = if slow > 0.0 { 3.0 / slow } else { 1.0 };
        (0..n).map(|i| end * i as f64 / (n.max(2) - 1) as f64).collect()
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if self.taus.is_empty() {
            return Err(DynamicsError::InvalidProtocol("tau grid is empty".into()));
        }
        if let Some(t) = self.taus.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(DynamicsError::InvalidTau(*t));
        }
        for (init, pair) in self.pairings {
            check_pairing(init, pair)?;
        }
        if (self.pairings[0].0 == SpinState::Zero) == (self.pairings[1].0 == SpinState::Zero) {
            return Err(DynamicsError::InvalidProtocol(
                "need one init-0 curve and one init-±1 curve".into(),
            ));
        }
        if self.shots == Some(0) {
            return Err(DynamicsError::InvalidProtocol("shots must be at least 1".into()));
        }
        let r = self.readout;
        if !(0.0..=1.0).contains(&r.bright) || !(0.0..=1.0).contains(&r.dark) || r.bright <= r.dark {
            return Err(DynamicsError::InvalidProtocol(format!(
                "readout needs 0 ≤ dark < bright ≤ 1, got dark {}, bright {}",
                r.dark, r.bright
            )));
        }
        Ok(())
    }
}

/// One measured difference curve with optional 1σ errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub init: SpinState,
    pub pair: (SpinState, SpinState),
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Option<Vec<f64>>,
}

impl DecayCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,difference,error\n");
        for (i, (t, v)) in self.taus.iter().zip(&self.values).enumerate() {
            let e = self.errors.as_ref().map_or(String::new(), |e| format!("{:?}", e[i]));
            out += &format!("{t:?},{v:?},{e}\n");
        }
        out
    }
}

/// Both difference curves named in `spec.pairings`.
pub fn simulate_experiment(rates: &RateMatrix, spec: &ProtocolSpec) -> Result<[DecayCurve; 2], DynamicsError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let contrast = spec.readout.bright - spec.readout.dark;
    let mut curves = Vec::with_capacity(2);
    for (init, pair) in spec.pairings {
        let mut values = Vec::with_capacity(spec.taus.len());
        let mut errors = Vec::with_capacity(spec.taus.len());
        for &tau in &spec.taus {
            let p = evolve(rates, init, tau)?;
            let mut measure = |state: SpinState| -> Result<(f64, f64), DynamicsError> {
                let prob = (spec.readout.dark + contrast * p[state.index()]).clamp(0.0, 1.0);
                match spec.shots {
                    None => Ok(((prob - spec.readout.dark) / contrast, 0.0)),
                    Some(n) => {
                        let k = Binomial::new(n, prob)
                            .map_err(|e| DynamicsError::InvalidProtocol(e.to_string()))?
                            .sample(&mut rng);
                        let s = k as f64 / n as f64;
                        // floor keeps the weight finite when every shot agrees
                        let var = (s * (1.0 - s)).max(1.0 / n as f64) / n as f64;
                        Ok(((s - spec.readout.dark) / contrast, var / (contrast * contrast)))
                    }
                }
            };
            let (a, va) = measure(pair.0)?;
            let (b, vb) = measure(pair.1)?;
            values.push(a - b);
            errors.push((va + vb).sqrt());
        }
        curves.push(DecayCurve {
            init,
            pair,
            taus: spec.taus.clone(),
            values,
            errors: spec.shots.map(|_| errors),
        });
    }
    let second = curves.pop().expect("two curves");
    let first = curves.pop().expect("two curves");
    Ok([first, second])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub rate: f64,
    pub rate_err: f64,
    pub chi2: f64,
}

struct Exponential<'a> {
    curve: &'a DecayCurve,
}

impl Exponential<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.curve.errors.as_ref().map_or(1.0, |e| 1.0 / e[i])
    }
}

impl LeastSquares for Exponential<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn n_residuals(&self) -> usize {
        self.curve.taus.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (&t, &y)) in self.curve.taus.iter().zip(&self.curve.values).enumerate() {
            out[i] = (p[0] * (-p[1] * t).exp() - y) * self.weight(i);
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        for (i, &t) in self.curve.taus.iter().enumerate() {
            let e = (-p[1] * t).exp();
            let w = self.weight(i);
            out[(i, 0)] = e * w;
            out[(i, 1)] = -p[0] * t * e * w;
        }
    }
}

/// Weighted fit of `A·exp(−rτ)`. Without errors every point gets unit weight
/// and the rate error is scaled by the reduced χ².
pub fn fit_exponential(curve: &DecayCurve) -> Result<ExponentialFit, DynamicsError> {
    if curve.taus.len() < 3 || curve.taus.len() != curve.values.len() {
        return Err(DynamicsError::InvalidProtocol("need at least three matching tau/value samples".into()));
    }
    if let Some(e) = &curve.errors {
        if e.len() != curve.taus.len() || e.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(DynamicsError::InvalidProtocol("errors must be positive, one per sample".into()));
        }
    }
    // log-linear start from the positive samples
    let pts: Vec<(f64, f64)> = curve
        .taus
        .iter()
        .zip(&curve.values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let (a0, r0) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1));
        let (mt, my) = (st / n, sy / n);
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        ((my - slope * mt).exp(), (-slope).max(1e-9))
    } else {
        (1.0, 1.0 / curve.taus.iter().copied().fold(1e-12, f64::max))
    };
    let specs = [ParamSpec::positive("amplitude", 1e-9, 1e9), ParamSpec::positive("rate", 1e-12, 1e15)];
    let start = [a0.clamp(1e-9, 1e9), r0.clamp(1e-12, 1e15)];
    let problem = Exponential { curve };
    let config = LmConfig {
        max_iterations: 1000,
        ..LmConfig::default()
    };
    let out = minimize(&problem, &specs, &start, &config);
    let cov = estimate_covariance(&out.jacobian, &["amplitude".into(), "rate".into()])?;
    // without error bars the scatter itself sets the scale
    let scale = match curve.errors {
        Some(_) => 1.0,
        None => out.chi2 / (curve.taus.len() - 2).max(1) as f64,
    };
    Ok(ExponentialFit {
        amplitude: out.params[0],
        rate: out.params[1],
        rate_err: (scale * cov[(1, 1)]).max(0.0).sqrt(),
        chi2: out.chi2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRates {
    pub omega: f64,
    pub omega_err: f64,
    pub gamma: f64,
    pub gamma_err: f64,
    /// `3Ω` from the init-0 curve.
    pub r1: ExponentialFit,
    /// `Ω + 2γ` from the init-±1 curve.
    pub r2: ExponentialFit,
    /// Set when the inferred γ is negative; the value is still reported.
    pub negative_gamma: bool,
}

/// Solves `Ω = r₁/3`, `γ = (r₂ − r₁/3)/2` from the two single-exponential fits.
pub fn extract_rates(curves: &[DecayCurve]) -> Result<ExtractedRates, DynamicsError> {
    for c in curves {
        check_pairing(c.init, c.pair)?;
    }
    let c1 = curves
        .iter()
        .find(|c| c.init == SpinState::Zero)
        .ok_or(DynamicsError::MissingCurve("init-0"))?;
    let c2 = curves
        .iter()
        .find(|c| c.init != SpinState::Zero)
        .ok_or(DynamicsError::MissingCurve("init-±1"))?;
    let r1 = fit_exponential(c1)?;
    let r2 = fit_exponential(c2)?;
    let omega = r1.rate / 3.0;
    let gamma = (r2.rate - omega) / 2.0;
    Ok(ExtractedRates {
        omega,
        omega_err: r1.rate_err / 3.0,
        gamma,
        gamma_err: (r2.rate_err.powi(2) + r1.rate_err.powi(2) / 9.0).sqrt() / 2.0,
        r1,
        r2,
        negative_gamma: gamma < 0.0,
    })
}

/// One ground-truth point for [`synthetic_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub nv_id: String,
    pub sample: String,
    pub temperature: f64,
    pub omega: f64,
    pub gamma: f64,
}

/// Simulates and extracts every truth point, giving a dataset in the same
/// shape as measured data. Point `i` uses seed `spec.seed + i`.
pub fn synthetic_dataset(truth: &[TruthPoint], spec: &ProtocolSpec) -> Result<Dataset, DynamicsError> {
    let mut rows = Vec::with_capacity(truth.len());
    for (i, t) in truth.iter().enumerate() {
        let rates = RateMatrix::new(t.omega, t.gamma)?;
        let mut s = spec.clone();
        s.seed = spec.seed.wrapping_add(i as u64);
        let ex = extract_rates(&simulate_experiment(&rates, &s)?)?;
        // noise-free runs have no error bars of their own
        let floor = |v: f64| if v > 0.0 { v } else { 1e-9 };
        rows.push(RateMeasurement::new(
            t.nv_id.clone(),
            t.sample.clone(),
            t.temperature,
            (ex.omega.max(0.0), floor(ex.omega_err)),
            (ex.gamma.max(0.0), floor(ex.gamma_err)),
        )?);
    }
    Ok(Dataset::new(rows, "simulated protocol")?)
}

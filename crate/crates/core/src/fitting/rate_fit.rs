//! Joint weighted fit of Ω(T) and γ(T) to a measured dataset.
//!
//! Mode coefficients and energies are shared between samples; the constants
//! `A3`, `B3` are per sample. Every row contributes two residuals, Ω then γ.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::estimate_covariance;
use super::lm::{minimize, LeastSquares, LmConfig, LmOutcome, ParamSpec, Termination};
use super::FitError;
use crate::dataset::{Dataset, RateMeasurement};
use crate::models::{
    orbach_factor, orbach_factor_ddelta, Mode, NModeParams, PriorModelParams, RateModelParams, SampleConstants,
};

pub const DEFAULT_SEED: u64 = 0x5EED_2023;
pub const DEFAULT_MULTISTART: usize = 16;
/// Lower temperature edge of the phonon-limited regime, K.
pub const PHONON_LIMITED_MIN_T: f64 = 125.0;
/// Range for log-uniform multistart draws of mode energies, meV.
pub const DELTA_START_RANGE: (f64, f64) = (20.0, 300.0);

const DELTA_BOUNDS: (f64, f64) = (1.0, 1000.0);
const COEFF_BOUNDS: (f64, f64) = (1e-30, 1e30);
const T5_BOUNDS: (f64, f64) = (1e-50, 1e10);
const CONST_BOUNDS: (f64, f64) = (1e-12, 1e12);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateModelKind {
    /// Sum of `modes` Orbach-like terms.
    NMode { modes: usize },
    /// One Orbach-like term plus a `T⁵` term.
    Prior,
}

impl RateModelKind {
    pub fn n_modes(self) -> usize {
        match self {
            RateModelKind::NMode { modes } => modes,
            RateModelKind::Prior => 1,
        }
    }

    fn core_params(self) -> usize {
        match self {
            RateModelKind::NMode { modes } => 3 * modes,
            RateModelKind::Prior => 5,
        }
    }
}

impl fmt::Display for RateModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateModelKind::NMode { modes } => write!(f, "n-mode:{modes}"),
            RateModelKind::Prior => f.write_str("prior"),
        }
    }
}

impl FromStr for RateModelKind {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "prior" {
            return Ok(RateModelKind::Prior);
        }
        if let Some(n) = s.strip_prefix("n-mode:") {
            if let Ok(modes @ 1..=3) = n.parse::<usize>() {
                return Ok(RateModelKind::NMode { modes });
            }
        }
        Err(FitError::InvalidProblem(format!(
            "unknown model `{s}` (expected n-mode:1, n-mode:2, n-mode:3 or prior)"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantsMode {
    /// Free `A3`, `B3` for every sample label in the dataset.
    PerSample,
    /// Constants pinned at zero and not fitted.
    FixedZero,
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub dataset: Dataset,
    pub model: RateModelKind,
    pub constants: ConstantsMode,
    /// Rows below this temperature are dropped before fitting.
    pub min_temperature: Option<f64>,
    /// Per-parameter `[lo, hi]` overrides, keyed by parameter name.
    pub bounds: BTreeMap<String, (f64, f64)>,
    /// Used as the first start when given.
    pub initial_guess: Option<Vec<f64>>,
    pub multistart: usize,
    pub seed: u64,
    pub lm: LmConfig,
}

impl FitProblem {
    pub fn new(dataset: Dataset, model: RateModelKind) -> Self {
        FitProblem {
            dataset,
            model,
            constants: ConstantsMode::PerSample,
            min_temperature: None,
            bounds: BTreeMap::new(),
            initial_guess: None,
            multistart: DEFAULT_MULTISTART,
            seed: DEFAULT_SEED,
            lm: LmConfig::default(),
        }
    }

    /// Restricts to `T ≥ 125 K` with sample constants fixed at zero.
    pub fn phonon_limited(mut self) -> Self {
        self.constants = ConstantsMode::FixedZero;
        self.min_temperature = Some(PHONON_LIMITED_MIN_T);
        self
    }

    pub fn with_multistart(mut self, n: usize) -> Self {
        self.multistart = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_constants(mut self, mode: ConstantsMode) -> Self {
        self.constants = mode;
        self
    }

    pub fn with_initial_guess(mut self, guess: Vec<f64>) -> Self {
        self.initial_guess = Some(guess);
        self
    }

    /// The dataset actually fitted (after the temperature cut).
    pub fn fitted_dataset(&self) -> Result<Dataset, FitError> {
        match self.min_temperature {
            None => Ok(self.dataset.clone()),
            Some(t) => self
                .dataset
                .filtered(|r| r.temperature >= t)
                .map_err(|_| FitError::InvalidProblem(format!("no rows at or above {t} K"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualChannel {
    Omega,
    Gamma,
}

/// One normalized residual `(model − data)/σ` with its row provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub row: usize,
    pub nv_id: String,
    pub sample: String,
    pub temperature: f64,
    pub channel: ResidualChannel,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    pub initial_chi2: f64,
    pub final_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: RateModelKind,
    pub constants: ConstantsMode,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub sigma: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_reduced: f64,
    pub residuals: Vec<ResidualEntry>,
    pub converged: bool,
    pub termination: Termination,
    pub n_iterations: usize,
    pub gradient_norm: f64,
    pub samples: Vec<String>,
    pub n_rows: usize,
    /// Row-order independent checksum of the fitted rows.
    pub dataset_checksum: String,
    pub starts: Vec<StartSummary>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.param_names.iter().position(|n| n == name)?;
        Some((self.params[i], self.sigma[i]))
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.params.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }

    pub fn normalized_residuals(&self) -> Vec<f64> {
        self.residuals.iter().map(|r| r.normalized).collect()
    }

    /// Mode energies in ascending order.
    pub fn deltas(&self) -> Vec<f64> {
        self.param_names
            .iter()
            .zip(&self.params)
            .filter(|(n, _)| n.starts_with("Delta"))
            .map(|(_, &v)| v)
            .collect()
    }

    /// Fitted parameters as an evaluable rate law.
    pub fn model_params(&self) -> RateModelParams {
        let p = &self.params;
        let mut constants = BTreeMap::new();
        let offset = self.model.core_params();
        if self.constants == ConstantsMode::PerSample {
            for (s, label) in self.samples.iter().enumerate() {
                constants.insert(
                    label.clone(),
                    SampleConstants {
                        a3: p[offset + 2 * s],
                        b3: p[offset + 2 * s + 1],
                    },
                );
            }
        }
        match self.model {
            RateModelKind::NMode { modes } => RateModelParams::NMode(NModeParams {
                modes: (0..modes)
                    .map(|k| Mode {
                        a: p[3 * k],
                        b: p[3 * k + 1],
                        delta: p[3 * k + 2],
                    })
                    .collect(),
                sample_constants: constants,
            }),
            RateModelKind::Prior => RateModelParams::Prior(PriorModelParams {
                a1: p[0],
                b1: p[1],
                delta: p[2],
                a2: p[3],
                b2: p[4],
                sample_constants: constants,
            }),
        }
    }
}

/// Residuals and analytic Jacobian of the joint Ω/γ problem.
pub struct RateObjective<'a> {
    rows: &'a [RateMeasurement],
    model: RateModelKind,
    samples: Vec<String>,
    row_sample: Vec<usize>,
    with_constants: bool,
}

impl<'a> RateObjective<'a> {
    pub fn new(dataset: &'a Dataset, model: RateModelKind, constants: ConstantsMode) -> Self {
        let samples = dataset.samples();
        let row_sample = dataset
            .rows()
            .iter()
            .map(|r| samples.iter().position(|s| *s == r.sample).expect("sample listed"))
            .collect();
        RateObjective {
            rows: dataset.rows(),
            model,
            samples,
            row_sample,
            with_constants: constants == ConstantsMode::PerSample,
        }
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        match self.model {
            RateModelKind::NMode { modes } => {
                for k in 1..=modes {
                    names.push(format!("A{k}"));
                    names.push(format!("B{k}"));
                    names.push(format!("Delta{k}"));
                }
            }
            RateModelKind::Prior => {
                names.extend(["A1", "B1", "Delta", "A2", "B2"].map(String::from));
            }
        }
        if self.with_constants {
            // A3/B3 unless a third mode already uses that index
            let k = match self.model {
                RateModelKind::NMode { modes: 3 } => 4,
                _ => 3,
            };
            for s in &self.samples {
                names.push(format!("A{k}[{s}]"));
                names.push(format!("B{k}[{s}]"));
            }
        }
        names
    }

    pub fn param_specs(&self, overrides: &BTreeMap<String, (f64, f64)>) -> Vec<ParamSpec> {
        let names = self.param_names();
        let core = self.model.core_params();
        names
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let (lo, hi) = overrides.get(&name).copied().unwrap_or_else(|| {
                    if i >= core {
                        CONST_BOUNDS
                    } else if name.starts_with("Delta") {
                        DELTA_BOUNDS
                    } else if self.model == RateModelKind::Prior && (i == 3 || i == 4) {
                        T5_BOUNDS
                    } else {
                        COEFF_BOUNDS
                    }
                });
                ParamSpec::positive(name, lo, hi)
            })
            .collect()
    }

    fn constants_offset(&self) -> usize {
        self.model.core_params()
    }

    /// Model Ω, γ for one row.
    fn model_row(&self, p: &[f64], i: usize) -> (f64, f64) {
        let t = self.rows[i].temperature;
        let (mut omega, mut gamma) = (0.0, 0.0);
        match self.model {
            RateModelKind::NMode { modes } => {
                for k in 0..modes {
                    let f = orbach_factor(p[3 * k + 2], t);
                    omega += p[3 * k] * f;
                    gamma += p[3 * k + 1] * f;
                }
            }
            RateModelKind::Prior => {
                let f = orbach_factor(p[2], t);
                let t5 = t.powi(5);
                omega = p[0] * f + p[3] * t5;
                gamma = p[1] * f + p[4] * t5;
            }
        }
        if self.with_constants {
            let o = self.constants_offset() + 2 * self.row_sample[i];
            omega += p[o];
            gamma += p[o + 1];
        }
        (omega, gamma)
    }

    /// Initial coefficients for fixed mode energies by weighted linear least
    /// squares, floored to small positive values.
    fn linear_start(&self, deltas: &[f64]) -> Vec<f64> {
        let m = self.rows.len();
        let mut cols: Vec<Box<dyn Fn(usize) -> f64 + '_>> = Vec::new();
        match self.model {
            RateModelKind::NMode { .. } => {
                for &d in deltas {
                    cols.push(Box::new(move |i| orbach_factor(d, self.rows[i].temperature)));
                }
            }
            RateModelKind::Prior => {
                let d = deltas[0];
                cols.push(Box::new(move |i| orbach_factor(d, self.rows[i].temperature)));
                cols.push(Box::new(move |i| self.rows[i].temperature.powi(5)));
            }
        }
        if self.with_constants {
            for s in 0..self.samples.len() {
                cols.push(Box::new(move |i| if self.row_sample[i] == s { 1.0 } else { 0.0 }));
            }
        }
        let ncol = cols.len();
        let solve = |value: &dyn Fn(&RateMeasurement) -> (f64, f64)| -> Vec<f64> {
            let a = DMatrix::from_fn(m, ncol, |i, j| cols[j](i) / value(&self.rows[i]).1);
            let b = DVector::from_fn(m, |i, _| {
                let (y, s) = value(&self.rows[i]);
                y / s
            });
            let x = a
                .clone()
                .svd(true, true)
                .solve(&b, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(ncol));
            let mean_y = self.rows.iter().map(|r| value(r).0.abs()).sum::<f64>() / m as f64;
            (0..ncol)
                .map(|j| {
                    let mean_col = (0..m).map(|i| cols[j](i).abs()).sum::<f64>() / m as f64;
                    let floor = if mean_col > 0.0 { 1e-3 * mean_y / mean_col } else { 1e-3 };
                    if x[j].is_finite() && x[j] > floor {
                        x[j]
                    } else {
                        floor.max(1e-300)
                    }
                })
                .collect()
        };
        let om = solve(&|r| (r.omega, r.omega_err));
        let ga = solve(&|r| (r.gamma, r.gamma_err));

        let mut p = Vec::with_capacity(self.param_names().len());
        match self.model {
            RateModelKind::NMode { .. } => {
                for (k, &d) in deltas.iter().enumerate() {
                    p.extend([om[k], ga[k], d]);
                }
            }
            RateModelKind::Prior => p.extend([om[0], ga[0], deltas[0], om[1], ga[1]]),
        }
        if self.with_constants {
            let first = ncol - self.samples.len();
            for s in 0..self.samples.len() {
                p.extend([om[first + s], ga[first + s]]);
            }
        }
        p
    }
}

impl LeastSquares for RateObjective<'_> {
    fn n_params(&self) -> usize {
        self.model.core_params() + if self.with_constants { 2 * self.samples.len() } else { 0 }
    }

    fn n_residuals(&self) -> usize {
        2 * self.rows.len()
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        for (i, r) in self.rows.iter().enumerate() {
            let (omega, gamma) = self.model_row(params, i);
            out[2 * i] = (omega - r.omega) / r.omega_err;
            out[2 * i + 1] = (gamma - r.gamma) / r.gamma_err;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (i, r) in self.rows.iter().enumerate() {
            let t = r.temperature;
            let (wo, wg) = (1.0 / r.omega_err, 1.0 / r.gamma_err);
            let (ro, rg) = (2 * i, 2 * i + 1);
            match self.model {
                RateModelKind::NMode { modes } => {
                    for k in 0..modes {
                        let d = p[3 * k + 2];
                        let f = orbach_factor(d, t);
                        let df = orbach_factor_ddelta(d, t);
                        out[(ro, 3 * k)] = f * wo;
                        out[(rg, 3 * k + 1)] = f * wg;
                        out[(ro, 3 * k + 2)] = p[3 * k] * df * wo;
                        out[(rg, 3 * k + 2)] = p[3 * k + 1] * df * wg;
                    }
                }
                RateModelKind::Prior => {
                    let f = orbach_factor(p[2], t);
                    let df = orbach_factor_ddelta(p[2], t);
                    let t5 = t.powi(5);
                    out[(ro, 0)] = f * wo;
                    out[(rg, 1)] = f * wg;
                    out[(ro, 2)] = p[0] * df * wo;
                    out[(rg, 2)] = p[1] * df * wg;
                    out[(ro, 3)] = t5 * wo;
                    out[(rg, 4)] = t5 * wg;
                }
            }
            if self.with_constants {
                let o = self.constants_offset() + 2 * self.row_sample[i];
                out[(ro, o)] = wo;
                out[(rg, o + 1)] = wg;
            }
        }
    }
}

fn draw_deltas(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (lo, hi) = DELTA_START_RANGE;
    let mut d: Vec<f64> = (0..n)
        .map(|_| (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp())
        .collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Fits the problem from every start and keeps the best.
///
/// Starts are drawn deterministically from `problem.seed` and run in
/// parallel; the winner is the lowest χ², then the fewest iterations, then
/// the lowest start index, so the result does not depend on thread count.
pub fn fit(problem: &FitProblem) -> Result<FitResult, FitError> {
    if problem.multistart == 0 {
        return Err(FitError::InvalidProblem("multistart must be at least 1".into()));
    }
    if let RateModelKind::NMode { modes } = problem.model {
        if !(1..=3).contains(&modes) {
            return Err(FitError::InvalidProblem(format!("{modes} modes not supported (1 to 3)")));
        }
    }
    let data = problem.fitted_dataset()?;
    let objective = RateObjective::new(&data, problem.model, problem.constants);
    let n_params = objective.n_params();
    let n_res = objective.n_residuals();
    if n_params >= n_res {
        return Err(FitError::InvalidProblem(format!(
            "{n_params} free parameters but only {n_res} residuals"
        )));
    }
    let specs = objective.param_specs(&problem.bounds);
    let names = objective.param_names();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(problem.multistart);
    if let Some(guess) = &problem.initial_guess {
        if guess.len() != n_params {
            return Err(FitError::InvalidProblem(format!(
                "initial guess has {} values, model needs {n_params}",
                guess.len()
            )));
        }
        if let Some(s) = specs.iter().zip(guess).find(|(s, &g)| !s.contains(g)) {
            return Err(FitError::InvalidProblem(format!(
                "initial guess for {} outside [{}, {}]",
                s.0.name, s.0.lower, s.0.upper
            )));
        }
        starts.push(guess.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    while starts.len() < problem.multistart {
        let deltas = draw_deltas(&mut rng, problem.model.n_modes());
        starts.push(objective.linear_start(&deltas));
    }

    let outcomes: Vec<LmOutcome> = starts
        .par_iter()
        .map(|s| minimize(&objective, &specs, s, &problem.lm))
        .collect();

    let summaries: Vec<StartSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(index, o)| StartSummary {
            index,
            initial_chi2: o.initial_chi2,
            final_chi2: o.chi2,
            iterations: o.iterations,
            converged: o.converged(),
        })
        .collect();
    let best_index = (0..outcomes.len())
        .min_by(|&a, &b| {
            let (x, y) = (&outcomes[a], &outcomes[b]);
            x.chi2
                .total_cmp(&y.chi2)
                .then(x.iterations.cmp(&y.iterations))
                .then(a.cmp(&b))
        })
        .expect("at least one start");
    let best = &outcomes[best_index];

    let covariance = estimate_covariance(&best.jacobian, &names)?;
    let dof = n_res - n_params;
    let mut result = FitResult {
        model: problem.model,
        constants: problem.constants,
        param_names: names,
        params: best.params.clone(),
        sigma: (0..n_params).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect(),
        covariance: (0..n_params)
            .map(|i| (0..n_params).map(|j| covariance[(i, j)]).collect())
            .collect(),
        chi2: best.chi2,
        dof,
        chi2_reduced: best.chi2 / dof as f64,
        residuals: data
            .rows()
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                [ResidualChannel::Omega, ResidualChannel::Gamma]
                    .into_iter()
                    .enumerate()
                    .map(move |(c, channel)| (i, r, c, channel))
            })
            .map(|(i, r, c, channel)| ResidualEntry {
                row: i,
                nv_id: r.nv_id.clone(),
                sample: r.sample.clone(),
                temperature: r.temperature,
                channel,
                normalized: best.residuals[2 * i + c],
            })
            .collect(),
        converged: best.converged(),
        termination: best.termination,
        n_iterations: best.iterations,
        gradient_norm: best.gradient_norm,
        samples: objective.samples().to_vec(),
        n_rows: data.len(),
        dataset_checksum: data.content_checksum(),
        starts: summaries,
    };
    canonicalize_modes(&mut result);
    Ok(result)
}

/// Reorders N-mode blocks so mode energies ascend.
fn canonicalize_modes(result: &mut FitResult) {
    let RateModelKind::NMode { modes } = result.model else {
        return;
    };
    let mut order: Vec<usize> = (0..modes).collect();
    order.sort_by(|&a, &b| result.params[3 * a + 2].total_cmp(&result.params[3 * b + 2]));
    if order.iter().enumerate().all(|(i, &k)| i == k) {
        return;
    }
    let n = result.params.len();
    let perm: Vec<usize> = order
        .iter()
        .flat_map(|&k| [3 * k, 3 * k + 1, 3 * k + 2])
        .chain(3 * modes..n)
        .collect();
    let params = perm.iter().map(|&i| result.params[i]).collect();
    let sigma = perm.iter().map(|&i| result.sigma[i]).collect();
    let cov = perm
        .iter()
        .map(|&i| perm.iter().map(|&j| result.covariance[i][j]).collect())
        .collect();
    result.params = params;
    result.sigma = sigma;
    result.covariance = cov;
}

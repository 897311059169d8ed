//! Residual statistics and model ranking.

use serde::{Deserialize, Serialize};

use super::rate_fit::{FitResult, RateModelKind, ResidualEntry};
use super::FitError;

/// Residuals beyond this many σ are listed as outliers.
pub const OUTLIER_THRESHOLD: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub count: usize,
    pub mean: f64,
    /// Population variance (divides by the number of residuals).
    pub variance: f64,
    pub histogram: Vec<HistogramBin>,
    pub outliers: Vec<ResidualEntry>,
}

/// Summary statistics of normalized residuals.
///
/// Bins are aligned to multiples of `bin_width` and cover every residual.
pub fn residual_diagnostics(result: &FitResult, bin_width: f64) -> ResidualDiagnostics {
    let values = result.normalized_residuals();
    let (mean, variance) = mean_variance(&values);
    ResidualDiagnostics {
        count: values.len(),
        mean,
        variance,
        histogram: histogram(&values, bin_width),
        outliers: result
            .residuals
            .iter()
            .filter(|r| r.normalized.abs() > OUTLIER_THRESHOLD)
            .cloned()
            .collect(),
    }
}

pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

pub fn histogram(values: &[f64], bin_width: f64) -> Vec<HistogramBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = (lo / bin_width).floor() as i64;
    let last = ((hi / bin_width).floor() as i64).max(first);
    let mut bins: Vec<HistogramBin> = (first..=last)
        .map(|k| HistogramBin {
            lower: k as f64 * bin_width,
            upper: (k + 1) as f64 * bin_width,
            count: 0,
        })
        .collect();
    for v in values {
        let k = ((v / bin_width).floor() as i64 - first).clamp(0, bins.len() as i64 - 1);
        bins[k as usize].count += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub model: RateModelKind,
    pub n_params: usize,
    pub dof: usize,
    pub chi2: f64,
    pub chi2_reduced: f64,
    /// χ²ᵥ minus that of the best-ranked model.
    pub delta_from_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRanking {
    pub dataset_checksum: String,
    pub entries: Vec<RankingEntry>,
}

/// Orders fits of the same dataset by ascending χ²ᵥ.
pub fn compare_models(results: &[FitResult]) -> Result<ModelRanking, FitError> {
    let first = results
        .first()
        .ok_or_else(|| FitError::InvalidProblem("no fit results to compare".into()))?;
    if let Some(other) = results.iter().find(|r| r.dataset_checksum != first.dataset_checksum) {
        return Err(FitError::DatasetMismatch {
            expected: first.dataset_checksum.clone(),
            found: other.dataset_checksum.clone(),
        });
    }
    let mut entries: Vec<RankingEntry> = results
        .iter()
        .map(|r| RankingEntry {
            model: r.model,
            n_params: r.params.len(),
            dof: r.dof,
            chi2: r.chi2,
            chi2_reduced: r.chi2_reduced,
            delta_from_best: 0.0,
        })
        .collect();
    entries.sort_by(|a, b| a.chi2_reduced.total_cmp(&b.chi2_reduced).then(a.n_params.cmp(&b.n_params)));
    let best = entries[0].chi2_reduced;
    for e in &mut entries {
        e.delta_from_best = e.chi2_reduced - best;
    }
    Ok(ModelRanking {
        dataset_checksum: first.dataset_checksum.clone(),
        entries,
    })
}

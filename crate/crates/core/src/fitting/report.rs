//! Structured JSON fit report.

use serde::{Deserialize, Serialize};

use super::rate_fit::{FitProblem, FitResult};
use crate::models::RateModelParams;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfigEcho {
    pub model: String,
    pub constants: String,
    pub min_temperature: Option<f64>,
    pub multistart: usize,
    pub seed: u64,
    pub data_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

/// Everything needed to reproduce and audit a fit. Field order is fixed by
/// declaration order, so identical fits serialize identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub tool: String,
    pub version: String,
    pub config: FitConfigEcho,
    pub dataset_provenance: String,
    pub dataset_checksum: String,
    pub parameters: Vec<ParameterEntry>,
    /// The fitted law in the same form `eval` accepts.
    pub model_params: RateModelParams,
    pub result: FitResult,
}

impl FitReport {
    pub fn new(problem: &FitProblem, result: FitResult, data_source: &str) -> Self {
        FitReport {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config: FitConfigEcho {
                model: problem.model.to_string(),
                constants: match problem.constants {
                    super::ConstantsMode::PerSample => "per-sample".into(),
                    super::ConstantsMode::FixedZero => "fixed-zero".into(),
                },
                min_temperature: problem.min_temperature,
                multistart: problem.multistart,
                seed: problem.seed,
                data_source: data_source.into(),
            },
            dataset_provenance: problem.dataset.provenance.clone(),
            dataset_checksum: result.dataset_checksum.clone(),
            parameters: result
                .param_names
                .iter()
                .zip(result.params.iter().zip(&result.sigma))
                .map(|(name, (&value, &sigma))| ParameterEntry {
                    name: name.clone(),
                    value,
                    sigma,
                })
                .collect(),
            model_params: result.model_params(),
            result,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

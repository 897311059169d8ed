//! Weighted nonlinear least squares for the relaxation-rate models.

pub mod covariance;
pub mod diagnostics;
pub mod lm;
pub mod rate_fit;
pub mod report;

pub use covariance::estimate_covariance;
pub use diagnostics::{compare_models, residual_diagnostics, ModelRanking, RankingEntry, ResidualDiagnostics};
pub use lm::{LeastSquares, LmConfig, ParamSpec, Termination, Transform};
pub use rate_fit::{
    fit, ConstantsMode, FitProblem, FitResult, RateModelKind, RateObjective, ResidualChannel, ResidualEntry,
    DEFAULT_MULTISTART, DEFAULT_SEED, PHONON_LIMITED_MIN_T,
};
pub use report::FitReport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
    #[error("normal equations are singular: parameters `{first}` and `{second}` are degenerate")]
    RankDeficient {
        first: String,
        second: String,
        /// Near-null direction in parameter space.
        direction: Vec<f64>,
    },
    #[error("fits were made on different datasets ({expected} vs {found})")]
    DatasetMismatch { expected: String, found: String },
}

//! Raman relaxation rates from phonon spectral functions.

mod bias;
mod coupling;
mod function;
mod rates;

pub use bias::{bias_sweep_temperatures, refit_ab_initio_curve, two_peak_fixture, FIXTURE_PEAKS};
pub use coupling::{parse_coupling_csv, read_coupling_file, CouplingEntry, CouplingTable, COUPLING_HEADER};
pub use function::{build_spectral_function, EnergyGrid, SpectralFunction, DEFAULT_SIGMA_MEV};
pub use rates::{
    first_order_raman_rate, order_dominance_ratio, rate_curve, second_order_rate, second_order_rate_estimate,
    RamanRateCurve, RateEstimate, QUADRATURE_TOLERANCE,
};

use crate::channel::TransitionChannel;
use crate::dataset::DatasetError;
use crate::fitting::FitError;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("no order-{order} coupling entries for channel {channel}")]
    EmptyChannel { channel: TransitionChannel, order: u8 },
    #[error("broadening width must be positive, got {0} meV")]
    InvalidSigma(f64),
    #[error("invalid energy grid: {0}")]
    InvalidGrid(String),
    #[error("energy grid ends at {have} meV but must reach {needed} meV")]
    GridTooShort { needed: f64, have: f64 },
    #[error("expected an order-{expected} spectral function, got order {found}")]
    OrderMismatch { expected: u8, found: u8 },
    #[error("spectral functions are sampled on different grids")]
    GridMismatch,
    #[error("temperature must be positive, got {0} K")]
    InvalidTemperature(f64),
    #[error("quadrature error estimate {estimate:.2e} exceeds tolerance; try a grid step of {suggested_step} meV")]
    CoarseGrid { estimate: f64, suggested_step: f64 },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

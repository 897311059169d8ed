//! Spin-lattice relaxation of NV-center spin triplets: phonon rate laws and
//! their weighted fits, Raman rate integrals over phonon spectral functions,
//! and a three-level simulator of the relaxation measurement.

pub mod channel;
pub mod cli;
pub mod dataset;
pub mod dynamics;
pub mod fitting;
pub mod models;
pub mod spectral;
pub mod units;

pub use channel::TransitionChannel;
pub use dataset::{Dataset, RateMeasurement};
pub use fitting::{fit, FitProblem, FitResult, RateModelKind};
pub use models::{coherence_limits, occupation, orbach_factor, NModeParams, RateModelParams};

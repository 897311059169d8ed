//! Physical constants and energy-unit conversion.
//!
//! Everything inside the crate works in a fixed unit system: energies in meV,
//! temperatures in K, rates in s⁻¹ and spin-phonon coupling amplitudes in MHz.
//! Conversions happen only at the edges (file I/O, CLI flags).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Boltzmann constant in meV/K (CODATA 2018).
pub const BOLTZMANN_MEV_PER_K: f64 = 8.617_333_262e-2;
/// Reduced Planck constant in meV·s (CODATA 2018).
pub const HBAR_MEV_S: f64 = 6.582_119_569e-13;
/// Planck constant in meV·s.
pub const PLANCK_MEV_S: f64 = 2.0 * std::f64::consts::PI * HBAR_MEV_S;
/// Energy of one MHz of frequency, h·(1 MHz), in meV.
pub const MEV_PER_MHZ: f64 = PLANCK_MEV_S * 1e6;
/// Energy of one GHz of frequency, h·(1 GHz), in meV.
pub const MEV_PER_GHZ: f64 = PLANCK_MEV_S * 1e9;

/// The constant set shared by every module. There is exactly one instance,
/// [`PhysicalConstants::CODATA`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub boltzmann_mev_per_k: f64,
    pub hbar_mev_s: f64,
    pub planck_mev_s: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        boltzmann_mev_per_k: BOLTZMANN_MEV_PER_K,
        hbar_mev_s: HBAR_MEV_S,
        planck_mev_s: PLANCK_MEV_S,
    };

    /// Thermal energy k_B·T in meV.
    pub fn thermal_energy(&self, temperature_k: f64) -> f64 {
        self.boltzmann_mev_per_k * temperature_k
    }
}

/// Units an energy may be expressed in.
///
/// `GigaHertz` means h·f and `Kelvin` means k_B·T.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "meV")]
    MilliElectronVolt,
    #[serde(rename = "GHz")]
    GigaHertz,
    #[serde(rename = "K")]
    Kelvin,
}

impl EnergyUnit {
    fn mev_per_unit(self) -> f64 {
        match self {
            EnergyUnit::MilliElectronVolt => 1.0,
            EnergyUnit::GigaHertz => MEV_PER_GHZ,
            EnergyUnit::Kelvin => BOLTZMANN_MEV_PER_K,
        }
    }
}

impl fmt::Display for EnergyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyUnit::MilliElectronVolt => "meV",
            EnergyUnit::GigaHertz => "GHz",
            EnergyUnit::Kelvin => "K",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown energy unit `{0}` (expected one of meV, GHz, K)")]
pub struct UnknownUnit(pub String);

impl FromStr for EnergyUnit {
    type Err = UnknownUnit;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "meV" | "mev" => Ok(EnergyUnit::MilliElectronVolt),
            "GHz" | "ghz" | "GHz*h" | "GHz·h" => Ok(EnergyUnit::GigaHertz),
            "K" | "k" | "K*kB" | "K·k_B" => Ok(EnergyUnit::Kelvin),
            other => Err(UnknownUnit(other.to_string())),
        }
    }
}

/// Converts `value` between energy units.
pub fn convert_energy(value: f64, from: EnergyUnit, to: EnergyUnit) -> f64 {
    if from == to {
        return value;
    }
    value * from.mev_per_unit() / to.mev_per_unit()
}

/// String-typed variant of [`convert_energy`] for CLI and file inputs.
pub fn convert_energy_str(value: f64, from: &str, to: &str) -> Result<f64, UnknownUnit> {
    Ok(convert_energy(value, from.parse()?, to.parse()?))
}

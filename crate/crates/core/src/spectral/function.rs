use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{CouplingTable, SpectralError};
use crate::channel::TransitionChannel;
use crate::units::MEV_PER_MHZ;

pub const DEFAULT_SIGMA_MEV: f64 = 7.5;

/// Uniform energy grid `start + i·step`, `i = 0..len`, in meV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl Default for EnergyGrid {
    /// 0 to 250 meV in 0.05 meV steps.
    fn default() -> Self {
        EnergyGrid::new(0.0, 250.0, 0.05).expect("valid default grid")
    }
}

impl EnergyGrid {
    /// Grid from `start` to `stop` inclusive. `stop − start` is rounded to a
    /// whole number of steps.
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, SpectralError> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || start < 0.0 || step <= 0.0 || stop <= start
        {
            return Err(SpectralError::InvalidGrid(format!(
                "need 0 ≤ start < stop and step > 0, got start {start}, stop {stop}, step {step}"
            )));
        }
        let intervals = ((stop - start) / step).round() as usize;
        if intervals < 2 {
            return Err(SpectralError::InvalidGrid("fewer than two intervals".into()));
        }
        Ok(EnergyGrid {
            start,
            step,
            len: intervals + 1,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stop(&self) -> f64 {
        self.energy(self.len - 1)
    }

    pub fn energy(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.energy(i))
    }

    fn same_as(&self, other: &EnergyGrid) -> bool {
        self.len == other.len
            && (self.start - other.start).abs() <= 1e-12 * self.step
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }
}

/// Spectral function F(ε) sampled on a uniform grid.
///
/// For order 2 the stored values are F⁽²⁾(ε, ε) and are dimensionless; for
/// order 1 they are F⁽¹⁾(ε) in meV. Coupling amplitudes in MHz enter as
/// energies h·f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunction {
    pub channel: Option<TransitionChannel>,
    pub order: u8,
    /// Broadening width, if built from a coupling table.
    pub sigma: Option<f64>,
    grid: EnergyGrid,
    values: Vec<f64>,
}

impl SpectralFunction {
    /// Wraps samples of F on `grid`. Values must be finite and non-negative.
    pub fn from_values(grid: EnergyGrid, values: Vec<f64>, order: u8) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(SpectralError::InvalidGrid(format!("spectral value {v} is not a finite non-negative number")));
        }
        if !(order == 1 || order == 2) {
            return Err(SpectralError::OrderMismatch { expected: 2, found: order });
        }
        Ok(SpectralFunction {
            channel: None,
            order,
            sigma: None,
            grid,
            values,
        })
    }

    /// Samples F(ε) from explicit `(energy, value)` lists. Energies must be
    /// ascending and uniformly spaced.
    pub fn from_samples(energies: &[f64], values: Vec<f64>, order: u8) -> Result<Self, SpectralError> {
        if energies.len() < 3 {
            return Err(SpectralError::InvalidGrid("need at least three samples".into()));
        }
        let step = energies[1] - energies[0];
        for (i, w) in energies.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1e-300) {
                return Err(SpectralError::InvalidGrid(format!("non-uniform spacing at sample {}", i + 1)));
            }
        }
        let grid = EnergyGrid::new(energies[0], energies[energies.len() - 1], step)?;
        Self::from_values(grid, values, order)
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn same_grid(&self, other: &SpectralFunction) -> bool {
        self.grid.same_as(&other.grid)
    }

    /// √F expressed back in coupling units: MHz/meV for order 2, MHz/√meV for order 1.
    pub fn amplitude(&self) -> Vec<f64> {
        self.values.iter().map(|f| f.sqrt() / MEV_PER_MHZ).collect()
    }

    /// `energy_mev,amplitude,spectral_function` columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy_mev,amplitude,spectral_function\n");
        for ((e, a), f) in self.grid.energies().zip(self.amplitude()).zip(&self.values) {
            out += &format!("{e:?},{a:?},{f:?}\n");
        }
        out
    }
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Normalized Gaussian at `center` minus its mirror image at `−center`.
///
/// On ε ≥ 0 this vanishes at ε = 0, so F(ε) → 0 there and the n(n+1) ~ (kT/ε)²
/// weight stays integrable. For peaks several σ above zero it is the plain
/// Gaussian to within exp(−2(center/σ)²).
fn kernel(energy: f64, center: f64, sigma: f64) -> f64 {
    gaussian(energy - center, sigma) - gaussian(energy + center, sigma)
}

/// Broadens the selected coupling entries into a spectral function.
///
/// Order 2: √F(ε) = h·Σ|V_l|·k(ε; ε_l). Order 1: F(ε) = h²·Σ|V_l|²·k(ε; ε_l).
/// `k` is a unit-area Gaussian of width `sigma`, mirrored about zero.
pub fn build_spectral_function(
    table: &CouplingTable,
    channel: TransitionChannel,
    order: u8,
    sigma: f64,
    grid: &EnergyGrid,
) -> Result<SpectralFunction, SpectralError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(SpectralError::InvalidSigma(sigma));
    }
    if !(order == 1 || order == 2) {
        return Err(SpectralError::OrderMismatch { expected: 2, found: order });
    }
    let entries: Vec<_> = table.select(channel, order).collect();
    if entries.is_empty() {
        return Err(SpectralError::EmptyChannel { channel, order });
    }
    let max_e = entries.iter().map(|e| e.energy_mev).fold(0.0, f64::max);
    let needed = max_e + 5.0 * sigma;
    if grid.start() > 0.0 || grid.stop() < needed {
        return Err(SpectralError::GridTooShort {
            needed,
            have: grid.stop(),
        });
    }

    let values = grid
        .energies()
        .map(|e| {
            let s: f64 = entries
                .iter()
                .map(|c| {
                    let v = c.amplitude_mhz.abs() * MEV_PER_MHZ;
                    let w = if order == 2 { v } else { v * v };
                    w * kernel(e, c.energy_mev, sigma)
                })
                .sum();
            let s = s.max(0.0);
            if order == 2 {
                s * s
            } else {
                s
            }
        })
        .collect();
    Ok(SpectralFunction {
        channel: Some(channel),
        order,
        sigma: Some(sigma),
        grid: *grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::CouplingEntry;

    fn dq(energy: f64, amp: f64) -> CouplingEntry {
        CouplingEntry {
            energy_mev: energy,
            amplitude_mhz: amp,
            channel: TransitionChannel::DoubleQuantum,
            order: 2,
        }
    }

    #[test]
    fn default_grid() {
        let g = EnergyGrid::default();
        assert_eq!(g.len(), 5001);
        assert!((g.stop() - 250.0).abs() < 1e-9);
    }

    #[test]
    fn single_mode_peak_value() {
        let t = CouplingTable::new(vec![dq(62.4, 2.0)]);
        let grid = EnergyGrid::new(0.0, 250.0, 0.1).unwrap();
        let f = build_spectral_function(&t, TransitionChannel::DoubleQuantum, 2, 7.5, &grid).unwrap();
        let amp = f.amplitude();
        let (imax, &peak) = amp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((grid.energy(imax) - 62.4).abs() < 1e-9);
        // 2 MHz × 1/(7.5·√(2π)) meV⁻¹
        assert!((peak - 0.106_384_6).abs() < 1e-6, "{peak}");
    }

    #[test]
    fn amplitude_integrates_to_total_coupling() {
        let t = CouplingTable::new(vec![dq(40.0, 1.5), dq(90.0, 0.5)]);
        let grid = EnergyGrid::new(0.0, 100.0, 0.05).unwrap();
        let f = build_spectral_function(&t, TransitionChannel::DoubleQuantum, 2, 0.5, &grid).unwrap();
        let a = f.amplitude();
        let integral: f64 = grid.step() * (a.iter().sum::<f64>() - 0.5 * (a[0] + a[a.len() - 1]));
        assert!((integral - 2.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn duplicate_entry_doubles_amplitude() {
        let grid = EnergyGrid::default();
        let one = build_spectral_function(&CouplingTable::new(vec![dq(65.0, 1.0)]), TransitionChannel::DoubleQuantum, 2, 7.5, &grid).unwrap();
        let two = build_spectral_function(
            &CouplingTable::new(vec![dq(65.0, 1.0), dq(65.0, 1.0)]),
            TransitionChannel::DoubleQuantum,
            2,
            7.5,
            &grid,
        )
        .unwrap();
        for (a, b) in one.amplitude().iter().zip(two.amplitude()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn vanishes_at_zero_energy() {
        let grid = EnergyGrid::default();
        let f = build_spectral_function(&CouplingTable::new(vec![dq(10.0, 1.0)]), TransitionChannel::DoubleQuantum, 2, 7.5, &grid).unwrap();
        assert_eq!(f.values()[0], 0.0);
    }

    #[test]
    fn build_errors() {
        let t = CouplingTable::new(vec![dq(62.4, 2.0)]);
        let grid = EnergyGrid::default();
        assert!(matches!(
            build_spectral_function(&t, TransitionChannel::SingleQuantum, 2, 7.5, &grid),
            Err(SpectralError::EmptyChannel { channel: TransitionChannel::SingleQuantum, order: 2 })
        ));
        assert!(matches!(
            build_spectral_function(&t, TransitionChannel::DoubleQuantum, 2, 0.0, &grid),
            Err(SpectralError::InvalidSigma(_))
        ));
        let short = EnergyGrid::new(0.0, 80.0, 0.05).unwrap();
        assert!(matches!(
            build_spectral_function(&t, TransitionChannel::DoubleQuantum, 2, 7.5, &short),
            Err(SpectralError::GridTooShort { .. })
        ));
    }

    #[test]
    fn from_samples_rejects_uneven_spacing() {
        assert!(SpectralFunction::from_samples(&[0.0, 1.0, 2.5], vec![0.0; 3], 2).is_err());
        let f = SpectralFunction::from_samples(&[0.0, 0.5, 1.0, 1.5], vec![0.0, 1.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(f.grid().len(), 4);
    }
}

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SpectralError, SpectralFunction};
use crate::models::orbach_factor;
use crate::units::{HBAR_MEV_S, MEV_PER_GHZ};

/// Accepted relative change between the grid and its every-other-point subgrid.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

/// 4π/ħ in meV⁻¹ s⁻¹.
const PREFACTOR: f64 = 4.0 * PI / HBAR_MEV_S;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// s⁻¹
    pub rate: f64,
    /// |T(h) − T(2h)| / |T(h)| for the trapezoid sums at the grid step and twice it.
    pub relative_error: f64,
}

fn check_temperature(t: f64) -> Result<(), SpectralError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(SpectralError::InvalidTemperature(t))
    }
}

/// Replaces the value at ε = 0 by its limit from the right.
///
/// With F vanishing quadratically at zero, n(n+1)F tends to a finite nonzero
/// constant there, but it cannot be evaluated at ε = 0 itself.
fn fill_zero_endpoint(integrand: &mut [f64], start: f64) {
    if start <= 0.0 && integrand.len() >= 3 {
        integrand[0] = (2.0 * integrand[1] - integrand[2]).max(0.0);
    }
}

/// Trapezoid sum of `integrand` on a uniform grid with the step-doubling error estimate.
fn integrate(integrand: &[f64], step: f64) -> (f64, f64) {
    let n = integrand.len();
    let trap = |idx: &mut dyn Iterator<Item = usize>, h: f64| {
        let pts: Vec<f64> = idx.map(|i| integrand[i]).collect();
        h * (pts.iter().sum::<f64>() - 0.5 * (pts[0] + pts[pts.len() - 1]))
    };
    let full = trap(&mut (0..n), step);
    let even_end = 2 * ((n - 1) / 2);
    let fine = trap(&mut (0..=even_end), step);
    let coarse = trap(&mut (0..=even_end).step_by(2), 2.0 * step);
    let err = if fine == 0.0 {
        if coarse == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((fine - coarse) / fine).abs()
    };
    (full, err)
}

fn accept(estimate: RateEstimate, step: f64) -> Result<f64, SpectralError> {
    if estimate.relative_error > QUADRATURE_TOLERANCE {
        Err(SpectralError::CoarseGrid {
            estimate: estimate.relative_error,
            suggested_step: step / 2.0,
        })
    } else {
        Ok(estimate.rate)
    }
}

/// Second-order Raman rate `(4π/ħ) ∫ n(n+1) F(ε, ε) dε` without the tolerance check.
pub fn second_order_rate_estimate(f: &SpectralFunction, temperature: f64) -> Result<RateEstimate, SpectralError> {
    if f.order != 2 {
        return Err(SpectralError::OrderMismatch { expected: 2, found: f.order });
    }
    check_temperature(temperature)?;
    let grid = f.grid();
    let mut integrand: Vec<f64> = grid
        .energies()
        .zip(f.values())
        .map(|(e, &v)| if e > 0.0 && v > 0.0 { orbach_factor(e, temperature) * v } else { 0.0 })
        .collect();
    fill_zero_endpoint(&mut integrand, grid.start());
    let (integral, relative_error) = integrate(&integrand, grid.step());
    Ok(RateEstimate {
        rate: PREFACTOR * integral,
        relative_error,
    })
}

/// Second-order Raman rate in s⁻¹.
///
/// Fails with [`SpectralError::CoarseGrid`] when the step-doubling estimate
/// exceeds [`QUADRATURE_TOLERANCE`].
pub fn second_order_rate(f: &SpectralFunction, temperature: f64) -> Result<f64, SpectralError> {
    accept(second_order_rate_estimate(f, temperature)?, f.grid().step())
}

/// Raman rate from first-order couplings taken to second order,
/// `(4π/ħ) Σ_paths ∫ n(n+1) F_a(ε) F_b(ε) / ε² dε`.
///
/// Each path is the pair (initial → intermediate, intermediate → final).
/// An empty path list gives zero.
pub fn first_order_raman_rate(
    paths: &[(&SpectralFunction, &SpectralFunction)],
    temperature: f64,
) -> Result<f64, SpectralError> {
    check_temperature(temperature)?;
    let Some(first) = paths.first() else {
        return Ok(0.0);
    };
    let grid = *first.0.grid();
    for (a, b) in paths {
        for f in [a, b] {
            if f.order != 1 {
                return Err(SpectralError::OrderMismatch { expected: 1, found: f.order });
            }
            if !f.same_grid(first.0) {
                return Err(SpectralError::GridMismatch);
            }
        }
    }
    let mut integrand: Vec<f64> = grid
        .energies()
        .enumerate()
        .map(|(i, e)| {
            if e <= 0.0 {
                return 0.0;
            }
            let product: f64 = paths.iter().map(|(a, b)| a.values()[i] * b.values()[i]).sum();
            if product == 0.0 {
                0.0
            } else {
                orbach_factor(e, temperature) * product / (e * e)
            }
        })
        .collect();
    fill_zero_endpoint(&mut integrand, grid.start());
    let (integral, relative_error) = integrate(&integrand, grid.step());
    accept(
        RateEstimate {
            rate: PREFACTOR * integral,
            relative_error,
        },
        grid.step(),
    )
}

/// `(2πD/ω)²` with `ω = E/ħ`: first- to second-order Raman scale for a
/// coupling of order `hD` and phonons of energy `E`.
pub fn order_dominance_ratio(d_ghz: f64, phonon_energy_mev: f64) -> f64 {
    (d_ghz * MEV_PER_GHZ / phonon_energy_mev).powi(2)
}

/// Second-order rates for the single- and double-quantum channels over a temperature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanRateCurve {
    pub temperatures: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub provenance: String,
}

impl RamanRateCurve {
    pub fn len(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("temperature_k,omega_s,gamma_s\n");
        for i in 0..self.len() {
            out += &format!("{:?},{:?},{:?}\n", self.temperatures[i], self.omega[i], self.gamma[i]);
        }
        out
    }
}

fn describe(f: &SpectralFunction) -> String {
    match (f.channel, f.sigma) {
        (Some(c), Some(s)) => format!("{c} sigma={s} meV"),
        _ => "sampled".into(),
    }
}

/// Ω(T) from `f_sq` and γ(T) from `f_dq`, evaluated in parallel.
pub fn rate_curve(
    f_sq: &SpectralFunction,
    f_dq: &SpectralFunction,
    temperatures: &[f64],
) -> Result<RamanRateCurve, SpectralError> {
    let pairs: Vec<(f64, f64)> = temperatures
        .par_iter()
        .map(|&t| Ok((second_order_rate(f_sq, t)?, second_order_rate(f_dq, t)?)))
        .collect::<Result<_, SpectralError>>()?;
    Ok(RamanRateCurve {
        temperatures: temperatures.to_vec(),
        omega: pairs.iter().map(|p| p.0).collect(),
        gamma: pairs.iter().map(|p| p.1).collect(),
        provenance: format!("omega: {}; gamma: {}", describe(f_sq), describe(f_dq)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::EnergyGrid;

    #[test]
    fn dominance_ratio_values() {
        let r = order_dominance_ratio(2.87, 50.0);
        assert!((r - 5.635e-8).abs() / 5.635e-8 < 1e-3, "{r}");
        assert_eq!(order_dominance_ratio(0.0, 50.0), 0.0);
        assert!((order_dominance_ratio(5.74, 50.0) / r - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_function_gives_zero_rate() {
        let g = EnergyGrid::default();
        let f = SpectralFunction::from_values(g, vec![0.0; g.len()], 2).unwrap();
        assert_eq!(second_order_rate(&f, 300.0).unwrap(), 0.0);
        let f1 = SpectralFunction::from_values(g, vec![0.0; g.len()], 1).unwrap();
        assert_eq!(first_order_raman_rate(&[(&f1, &f1)], 300.0).unwrap(), 0.0);
        assert_eq!(first_order_raman_rate(&[], 300.0).unwrap(), 0.0);
    }

    #[test]
    fn order_and_temperature_checks() {
        let g = EnergyGrid::default();
        let f1 = SpectralFunction::from_values(g, vec![0.0; g.len()], 1).unwrap();
        assert!(matches!(second_order_rate(&f1, 300.0), Err(SpectralError::OrderMismatch { .. })));
        let f2 = SpectralFunction::from_values(g, vec![0.0; g.len()], 2).unwrap();
        assert!(matches!(second_order_rate(&f2, 0.0), Err(SpectralError::InvalidTemperature(_))));
        let other = EnergyGrid::new(0.0, 200.0, 0.05).unwrap();
        let f1b = SpectralFunction::from_values(other, vec![0.0; other.len()], 1).unwrap();
        assert!(matches!(first_order_raman_rate(&[(&f1, &f1b)], 300.0), Err(SpectralError::GridMismatch)));
    }

    #[test]
    fn underresolved_peak_is_reported() {
        let g = EnergyGrid::new(0.0, 250.0, 0.05).unwrap();
        let values = g
            .energies()
            .map(|e| (-0.5 * ((e - 60.0) / 0.02f64).powi(2)).exp())
            .collect();
        let f = SpectralFunction::from_values(g, values, 2).unwrap();
        match second_order_rate(&f, 300.0) {
            Err(SpectralError::CoarseGrid { suggested_step, .. }) => assert_eq!(suggested_step, 0.025),
            other => panic!("{other:?}"),
        }
    }
}

//! Broadens the anchor-mode coupling table, integrates the second-order
//! Raman rates, and checks the integral against the closed-form Orbach rate
//! for a near-delta spectral function.

use std::f64::consts::PI;

use nvrelax::channel::TransitionChannel;
use nvrelax::models::orbach_factor;
use nvrelax::spectral::{
    build_spectral_function, parse_coupling_csv, rate_curve, second_order_rate, EnergyGrid, SpectralFunction,
};
use nvrelax::units::HBAR_MEV_S;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_coupling_csv(include_str!("../data/anchor_couplings.csv"))?;
    let grid = EnergyGrid::default();
    let sq = build_spectral_function(&table, TransitionChannel::SingleQuantum, 2, 7.5, &grid)?;
    let dq = build_spectral_function(&table, TransitionChannel::DoubleQuantum, 2, 7.5, &grid)?;
    let temps: Vec<f64> = (1..=10).map(|i| 50.0 * i as f64).collect();
    let curve = rate_curve(&sq, &dq, &temps)?;
    println!("T (K)   Omega (s⁻¹)   gamma (s⁻¹)");
    for i in 0..curve.len() {
        println!("{:>5.0}   {:.4e}    {:.4e}", curve.temperatures[i], curve.omega[i], curve.gamma[i]);
    }

    // F(ε) = A·g(ε − Δ) with σ = 0.01 meV against (4π/ħ)·A·n(n+1)
    let (a, delta, sigma) = (1e-6, 68.2, 0.01);
    let fine = EnergyGrid::new(0.0, 100.0, 0.002)?;
    let values = fine
        .energies()
        .map(|e| a * (-0.5 * ((e - delta) / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt()))
        .collect();
    let f = SpectralFunction::from_values(fine, values, 2)?;
    for t in [100.0, 295.0, 500.0] {
        let numeric = second_order_rate(&f, t)?;
        let exact = 4.0 * PI / HBAR_MEV_S * a * orbach_factor(delta, t);
        println!("delta check at {t} K: relative difference {:.2e}", (numeric / exact - 1.0).abs());
    }
    Ok(())
}

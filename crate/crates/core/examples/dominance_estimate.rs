//! Scale of first- relative to second-order Raman scattering, estimated
//! from the zero-field splitting and a typical acoustic phonon energy, then
//! checked with explicit first- and second-order spectral functions.

use nvrelax::channel::TransitionChannel;
use nvrelax::spectral::{
    build_spectral_function, first_order_raman_rate, order_dominance_ratio, second_order_rate, CouplingEntry,
    CouplingTable, EnergyGrid,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("(2πD/ω)² at D = 2.87 GHz, ħω = 50 meV: {:.3e}", order_dominance_ratio(2.87, 50.0));

    // MHz-scale couplings of both orders at 50 meV
    let entry = |order| CouplingEntry {
        energy_mev: 50.0,
        amplitude_mhz: 1.0,
        channel: TransitionChannel::DoubleQuantum,
        order,
    };
    let table = CouplingTable::new(vec![entry(1), entry(2)]);
    let grid = EnergyGrid::default();
    let f1 = build_spectral_function(&table, TransitionChannel::DoubleQuantum, 1, 7.5, &grid)?;
    let f2 = build_spectral_function(&table, TransitionChannel::DoubleQuantum, 2, 7.5, &grid)?;
    for t in [100.0, 295.0, 500.0] {
        let first = first_order_raman_rate(&[(&f1, &f1)], t)?;
        let second = second_order_rate(&f2, t)?;
        println!("{t:>5} K: first/second = {:.2e}", first / second);
    }
    Ok(())
}

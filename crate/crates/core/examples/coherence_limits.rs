//! Relaxation-imposed coherence limits and the γ/Ω ratio from the published
//! two-mode parameters for sample A.

use nvrelax::models::{coherence_limits, eval_n_mode, NModeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = NModeParams::published_two_mode();
    println!("{:>6} {:>10} {:>10} {:>6} {:>11} {:>11} {:>11}", "T (K)", "Omega", "gamma", "γ/Ω", "T2 SQ (s)", "T2 DQ (s)", "T1 (s)");
    for t in [10.0, 50.0, 100.0, 150.0, 200.0, 295.0, 350.0, 400.0, 474.0] {
        let r = eval_n_mode(&params, Some("A"), t)?;
        let c = coherence_limits(r.omega, r.gamma);
        println!(
            "{t:>6.0} {:>10.4} {:>10.4} {:>6.2} {:>11.3e} {:>11.3e} {:>11.3e}",
            r.omega,
            r.gamma,
            r.gamma / r.omega,
            c.t2_sq,
            c.t2_dq,
            c.t1
        );
    }
    Ok(())
}

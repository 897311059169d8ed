//! Fits the two-mode law and the Orbach + T⁵ law to the same data and
//! compares their extrapolations beyond the measured range.

use nvrelax::dataset::Dataset;
use nvrelax::fitting::{fit, FitProblem, RateModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::builtin();
    let two = fit(&FitProblem::new(data.clone(), RateModelKind::NMode { modes: 2 }))?;
    let prior = fit(&FitProblem::new(data, RateModelKind::Prior))?;
    println!("chi2_red: two-mode {:.3}, prior {:.3}", two.chi2_reduced, prior.chi2_reduced);

    let (a, b) = (two.model_params(), prior.model_params());
    println!("{:>6} {:>12} {:>12} {:>8} {:>8}", "T (K)", "Omega", "gamma", "Ω ratio", "γ ratio");
    for t in [300.0, 400.0, 500.0, 600.0, 700.0, 800.0] {
        let (p, q) = (a.eval(None, t)?, b.eval(None, t)?);
        println!(
            "{t:>6.0} {:>12.1} {:>12.1} {:>8.3} {:>8.3}",
            p.omega,
            p.gamma,
            q.omega / p.omega,
            q.gamma / p.gamma
        );
    }
    Ok(())
}

//! Fits the two-mode law to the embedded measurements and prints the
//! parameters, goodness of fit and residual summary.

use nvrelax::dataset::Dataset;
use nvrelax::fitting::{fit, residual_diagnostics, FitProblem, RateModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::builtin();
    println!("{} rows, samples {:?}", data.len(), data.samples());

    let result = fit(&FitProblem::new(data, RateModelKind::NMode { modes: 2 }))?;
    for (name, (v, s)) in result.param_names.iter().zip(result.params.iter().zip(&result.sigma)) {
        println!("{name:<8} {v:>12.4e} ± {s:.2e}");
    }
    println!("chi2_red = {:.3} on {} dof ({:?})", result.chi2_reduced, result.dof, result.termination);

    let diag = residual_diagnostics(&result, 0.5);
    println!("residual mean {:+.3}, variance {:.3}", diag.mean, diag.variance);
    for r in &diag.outliers {
        println!("  outlier {} {} at {} K ({:?}): {:+.2}σ", r.nv_id, r.sample, r.temperature, r.channel, r.normalized);
    }

    // the phonon-limited framing: T ≥ 125 K, constants fixed at zero
    let hot = fit(&FitProblem::new(Dataset::builtin(), RateModelKind::NMode { modes: 2 }).phonon_limited())?;
    println!("phonon-limited: Delta = {:.1?} meV, chi2_red = {:.3}", hot.deltas(), hot.chi2_reduced);
    Ok(())
}

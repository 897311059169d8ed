//! Fits 1-, 2- and 3-mode laws and the T⁵ law to the built-in dataset and
//! ranks them by reduced χ².

use nvrelax::dataset::Dataset;
use nvrelax::fitting::{compare_models, fit, FitProblem, RateModelKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::builtin();
    let mut results = Vec::new();
    for model in ["n-mode:1", "n-mode:2", "n-mode:3", "prior"] {
        let kind: RateModelKind = model.parse()?;
        let r = fit(&FitProblem::new(data.clone(), kind))?;
        println!("{model:>9}  chi2_red = {:.3}  converged = {}", r.chi2_reduced, r.converged);
        for (name, (v, s)) in r.param_names.iter().zip(r.params.iter().zip(&r.sigma)) {
            println!("           {name:<8} {v:>12.5e} ± {s:.2e}");
        }
        results.push(r);
    }

    println!("\nranking:");
    for e in compare_models(&results)?.entries {
        println!("  {:>9}  dof {:>3}  chi2_red {:.3}  (+{:.3})", e.model.to_string(), e.dof, e.chi2_reduced, e.delta_from_best);
    }
    Ok(())
}

use std::fs;

use serde_json::json;

use super::output::{create_dir, emit, num, sha256_hex, to_json, Provenance};
use super::{Cli, CliError, Command, CompareArgs, DataArgs, EvalArgs, FitArgs, SimulateArgs, SpectralArgs, TemperatureGrid};
use crate::channel::TransitionChannel;
use crate::dataset::{load_dataset, RateMeasurement};
use crate::dynamics::{extract_rates, simulate_experiment, ProtocolSpec, RateMatrix, ReadoutModel, SpinState, STANDARD_PAIRINGS};
use crate::fitting::report::FitReport;
use crate::fitting::{compare_models, fit, FitError, FitProblem, FitResult, RateModelKind};
use crate::models::{coherence_limits, NModeParams, RateModelParams};
use crate::spectral::{build_spectral_function, rate_curve, read_coupling_file, refit_ab_initio_curve, EnergyGrid};

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn fit_error(e: FitError) -> CliError {
    match e {
        FitError::RankDeficient { .. } => CliError::NonConvergence(e.to_string()),
        other => input(other),
    }
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(input("--threads must be at least 1"));
        }
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.seed),
        Command::Eval(a) => cmd_eval(a, cli.seed),
        Command::Spectral(a) => cmd_spectral(a, cli.seed),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Compare(a) => cmd_compare(a, cli.seed),
    }
}

fn problem_for(data: &DataArgs, model: RateModelKind, seed: u64) -> Result<FitProblem, CliError> {
    let dataset = load_dataset(&data.data).map_err(input)?;
    let mut p = FitProblem::new(dataset, model)
        .with_multistart(data.multistart)
        .with_seed(seed);
    if data.phonon_limited_only {
        p = p.phonon_limited();
    }
    Ok(p)
}

fn cmd_fit(a: &FitArgs, seed: u64) -> Result<(), CliError> {
    let model: RateModelKind = a.model.parse().map_err(input)?;
    let problem = problem_for(&a.data, model, seed)?;
    let result = fit(&problem).map_err(fit_error)?;
    let converged = result.converged;
    let termination = result.termination;

    if let Some(path) = &a.residuals {
        let prov = Provenance {
            command: "fit",
            config: format!("{a:?}"),
            seed,
            input_sha256: result.dataset_checksum.clone(),
        };
        let mut csv = prov.csv_header() + "row,nv_id,sample,temperature_k,channel,normalized_residual\n";
        for r in &result.residuals {
            let channel = match r.channel {
                crate::fitting::ResidualChannel::Omega => "omega",
                crate::fitting::ResidualChannel::Gamma => "gamma",
            };
            csv += &format!("{},{},{},{},{channel},{}\n", r.row, r.nv_id, r.sample, num(r.temperature), num(r.normalized));
        }
        emit(Some(path), &csv)?;
    }
    let report = FitReport::new(&problem, result, &a.data.data);
    emit(a.out.as_deref(), &report.to_json())?;
    if converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!("fit did not converge ({termination:?})")))
    }
}

fn temperatures(grid: &TemperatureGrid) -> Result<Vec<f64>, CliError> {
    let temps = match &grid.temperatures {
        Some(t) => t.clone(),
        None => {
            let (lo, hi, step) = (grid.t_min, grid.t_max, grid.t_step);
            if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
                return Err(input(format!("invalid temperature grid {lo}..{hi} step {step}")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| lo + i as f64 * step).collect()
        }
    };
    if temps.is_empty() {
        return Err(input("temperature grid is empty"));
    }
    if let Some(t) = temps.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(input(format!("temperatures must be positive, got {t}")));
    }
    Ok(temps)
}

fn load_params(spec: &str) -> Result<(RateModelParams, String), CliError> {
    if spec == "published" {
        return Ok((RateModelParams::NMode(NModeParams::published_two_mode()), "published".into()));
    }
    let text = fs::read_to_string(spec).map_err(|e| input(format!("cannot read {spec}: {e}")))?;
    let checksum = sha256_hex(text.as_bytes());
    if let Ok(report) = FitReport::from_json(&text) {
        return Ok((report.model_params, checksum));
    }
    let params: RateModelParams =
        serde_json::from_str(&text).map_err(|e| input(format!("{spec} is neither a fit report nor a parameter file: {e}")))?;
    Ok((params, checksum))
}

fn cmd_eval(a: &EvalArgs, seed: u64) -> Result<(), CliError> {
    let (params, checksum) = load_params(&a.params)?;
    let temps = temperatures(&a.grid)?;
    let prov = Provenance {
        command: "eval",
        config: format!("{a:?}"),
        seed,
        input_sha256: checksum,
    };
    let mut csv = prov.csv_header() + "temperature_k,omega_s,gamma_s,gamma_over_omega,t2_sq_s,t2_dq_s,t1_s\n";
    for t in temps {
        let r = params.eval(a.sample.as_deref(), t).map_err(input)?;
        let ratio = if r.omega > 0.0 { r.gamma / r.omega } else { f64::NAN };
        let c = coherence_limits(r.omega, r.gamma);
        csv += &[t, r.omega, r.gamma, ratio, c.t2_sq, c.t2_dq, c.t1]
            .map(num)
            .join(",");
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)
}

fn cmd_spectral(a: &SpectralArgs, seed: u64) -> Result<(), CliError> {
    let bytes = fs::read(&a.couplings).map_err(|e| input(format!("cannot read {}: {e}", a.couplings.display())))?;
    let table = read_coupling_file(&a.couplings).map_err(input)?;
    let grid = EnergyGrid::new(0.0, a.e_max, a.e_step).map_err(input)?;
    let temps = temperatures(&a.grid)?;
    let prov = Provenance {
        command: "spectral",
        config: format!("{a:?}"),
        seed,
        input_sha256: sha256_hex(&bytes),
    };

    let f_sq = build_spectral_function(&table, TransitionChannel::SingleQuantum, 2, a.sigma, &grid).map_err(input)?;
    let f_dq = build_spectral_function(&table, TransitionChannel::DoubleQuantum, 2, a.sigma, &grid).map_err(input)?;
    let curve = rate_curve(&f_sq, &f_dq, &temps).map_err(input)?;

    create_dir(&a.out_dir)?;
    let header = prov.csv_header();
    emit(Some(&a.out_dir.join("spectral_sq.csv")), &(header.clone() + &f_sq.to_csv()))?;
    emit(Some(&a.out_dir.join("spectral_dq.csv")), &(header.clone() + &f_dq.to_csv()))?;
    emit(Some(&a.out_dir.join("rates.csv")), &(header + &curve.to_csv()))?;

    if a.refit {
        let t_max = temps.iter().copied().fold(0.0, f64::max);
        let result = refit_ab_initio_curve(&curve, t_max).map_err(|e| match e {
            crate::spectral::SpectralError::Fit(f) => fit_error(f),
            other => input(other),
        })?;
        let converged = result.converged;
        let doc = json!({
            "provenance": prov.json(),
            "deltas_mev": result.deltas(),
            "result": result,
        });
        emit(Some(&a.out_dir.join("refit.json")), &to_json(&doc))?;
        if !converged {
            return Err(CliError::NonConvergence("refit did not converge".into()));
        }
    }
    Ok(())
}

fn parse_curve(s: &str) -> Result<(SpinState, (SpinState, SpinState)), CliError> {
    let bad = || input(format!("curve `{s}` is not of the form INIT:A,B"));
    let (init, pair) = s.split_once(':').ok_or_else(bad)?;
    let (a, b) = pair.split_once(',').ok_or_else(bad)?;
    Ok((
        init.parse().map_err(input)?,
        (a.parse().map_err(input)?, b.parse().map_err(input)?),
    ))
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<(), CliError> {
    let rates = RateMatrix::new(a.omega, a.gamma).map_err(input)?;
    let pairings = match a.curves.len() {
        0 => STANDARD_PAIRINGS,
        2 => [parse_curve(&a.curves[0])?, parse_curve(&a.curves[1])?],
        n => return Err(input(format!("give exactly two --curve options, got {n}"))),
    };
    if a.taus < 3 {
        return Err(input("--taus must be at least 3"));
    }
    let spec = ProtocolSpec {
        taus: ProtocolSpec::default_taus(&rates, a.taus),
        shots: a.shots,
        readout: ReadoutModel {
            bright: a.bright,
            dark: a.dark,
        },
        seed,
        pairings,
    };
    let curves = simulate_experiment(&rates, &spec).map_err(input)?;
    let ex = extract_rates(&curves).map_err(input)?;
    let prov = Provenance {
        command: "simulate",
        config: format!("{a:?}"),
        seed,
        input_sha256: sha256_hex(
            format!(
                "{:?}",
                (a.omega, a.gamma, a.shots, a.taus, a.bright, a.dark, &a.curves, a.temperature)
            )
            .as_bytes(),
        ),
    };

    create_dir(&a.out_dir)?;
    let mut csv = prov.csv_header() + "init,readout_a,readout_b,tau_s,difference,error\n";
    for c in &curves {
        for (i, (t, v)) in c.taus.iter().zip(&c.values).enumerate() {
            let e = c.errors.as_ref().map_or(0.0, |e| e[i]);
            csv += &format!("{},{},{},{},{},{}\n", c.init, c.pair.0, c.pair.1, num(*t), num(*v), num(e));
        }
    }
    emit(Some(&a.out_dir.join("curves.csv")), &csv)?;

    // noise-free fits report (near) zero errors; the dataset format needs positive ones
    let floor = |v: f64| v.max(1e-12);
    let row = RateMeasurement::new(
        "simulated",
        "simulated",
        a.temperature,
        (ex.omega.max(0.0), floor(ex.omega_err)),
        (ex.gamma.max(0.0), floor(ex.gamma_err)),
    )
    .map_err(input)?;
    let data = crate::dataset::Dataset::new(vec![row], "simulated protocol").map_err(input)?;
    emit(Some(&a.out_dir.join("dataset.csv")), &(prov.csv_header() + &data.to_csv()))?;

    let doc = json!({
        "provenance": prov.json(),
        "truth": { "omega": a.omega, "gamma": a.gamma },
        "extracted": ex,
    });
    emit(Some(&a.out_dir.join("extraction.json")), &to_json(&doc))?;
    if ex.negative_gamma {
        eprintln!("nvrelax: warning: extracted gamma is negative ({:.3e} ± {:.3e})", ex.gamma, ex.gamma_err);
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, seed: u64) -> Result<(), CliError> {
    if a.models.len() < 2 {
        return Err(input("compare needs at least two models"));
    }
    let kinds = a
        .models
        .iter()
        .map(|m| m.parse::<RateModelKind>().map_err(input))
        .collect::<Result<Vec<_>, _>>()?;
    if !(a.at_temperature.is_finite() && a.at_temperature > 0.0) {
        return Err(input("--at-temperature must be positive"));
    }
    let results: Vec<FitResult> = kinds
        .iter()
        .map(|&k| fit(&problem_for(&a.data, k, seed)?).map_err(fit_error))
        .collect::<Result<_, _>>()?;
    let ranking = compare_models(&results).map_err(input)?;

    let t = a.at_temperature;
    let reference = results[0].model_params().eval(None, t).map_err(input)?;
    let predictions: Vec<_> = results
        .iter()
        .map(|r| {
            let p = r.model_params().eval(None, t).expect("fitted params evaluate without a sample");
            json!({
                "model": r.model.to_string(),
                "omega_s": p.omega,
                "gamma_s": p.gamma,
                "omega_vs_reference": p.omega / reference.omega,
                "gamma_vs_reference": p.gamma / reference.gamma,
            })
        })
        .collect();
    let unconverged: Vec<String> = results.iter().filter(|r| !r.converged).map(|r| r.model.to_string()).collect();

    let prov = Provenance {
        command: "compare",
        config: format!("{a:?}"),
        seed,
        input_sha256: ranking.dataset_checksum.clone(),
    };
    let doc = json!({
        "provenance": prov.json(),
        "ranking": ranking.entries,
        "reference_model": results[0].model.to_string(),
        "prediction_temperature_k": t,
        "predictions": predictions,
        "fits": results.iter().map(|r| json!({
            "model": r.model.to_string(),
            "parameters": r.param_names.iter().zip(r.params.iter().zip(&r.sigma))
                .map(|(n, (v, s))| json!({"name": n, "value": v, "sigma": s}))
                .collect::<Vec<_>>(),
            "converged": r.converged,
        })).collect::<Vec<_>>(),
    });
    emit(a.out.as_deref(), &to_json(&doc))?;
    if unconverged.is_empty() {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!("fits did not converge: {}", unconverged.join(", "))))
    }
}

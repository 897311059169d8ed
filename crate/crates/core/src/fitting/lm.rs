//! Damped Gauss–Newton (Levenberg–Marquardt) minimizer for weighted
//! least-squares problems with positivity and box constraints.
//!
//! Problems supply normalized residuals `r_i = (model_i − data_i)/σ_i` and
//! their Jacobian with respect to the natural parameters. The minimizer works
//! in internal coordinates: `ln p` for [`Transform::Log`] parameters and `p`
//! itself otherwise, projecting each trial point back into the box.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Weighted least-squares problem in natural parameters.
pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Normalized residuals `(model − data)/σ`.
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// `∂r_i/∂p_j`, `n_residuals × n_params`.
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// Fit `ln p`; keeps `p > 0`.
    Log,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub transform: Transform,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSpec {
    pub fn positive(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.into(),
            transform: Transform::Log,
            lower,
            upper,
        }
    }

    pub fn linear(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.into(),
            transform: Transform::Identity,
            lower,
            upper,
        }
    }

    fn to_internal(&self, p: f64) -> f64 {
        match self.transform {
            Transform::Log => p.ln(),
            Transform::Identity => p,
        }
    }

    fn to_natural(&self, t: f64) -> f64 {
        match self.transform {
            Transform::Log => t.exp(),
            Transform::Identity => t,
        }
    }

    /// dp/dθ at natural value `p`.
    fn chain(&self, p: f64) -> f64 {
        match self.transform {
            Transform::Log => p,
            Transform::Identity => 1.0,
        }
    }

    fn internal_bounds(&self) -> (f64, f64) {
        (self.to_internal(self.lower), self.to_internal(self.upper))
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lower && p <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers χ² by less than this fraction.
    pub rel_chi2_tol: f64,
    /// Stop when the scaled gradient falls below this value (see
    /// [`scaled_gradient_norm`]).
    pub gradient_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            max_iterations: 500,
            rel_chi2_tol: 1e-10,
            gradient_tol: 1e-8,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    RelativeReduction,
    SmallGradient,
    SmallStep,
    ZeroResidual,
    MaxIterations,
    Stalled,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        !matches!(self, Termination::MaxIterations | Termination::Stalled)
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub initial_chi2: f64,
    pub chi2: f64,
    pub residuals: Vec<f64>,
    /// Jacobian in natural parameters at the returned point.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub gradient_norm: f64,
}

impl LmOutcome {
    pub fn converged(&self) -> bool {
        self.termination.is_converged()
    }
}

/// Largest cosine between the residual vector and a Jacobian column,
/// `max_j |J_jᵀ r| / (‖J_j‖ ‖r‖)`. Scale-free, zero at a stationary point.
pub fn scaled_gradient_norm(jacobian: &DMatrix<f64>, residuals: &[f64]) -> f64 {
    let r = DVector::from_column_slice(residuals);
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    jacobian
        .column_iter()
        .map(|c| {
            let cn = c.norm();
            if cn == 0.0 {
                0.0
            } else {
                (c.dot(&r) / (cn * rn)).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimizes χ² = Σ r_i² from `initial` (natural parameters).
///
/// The initial point is projected into the bounds first. χ² never increases
/// between accepted iterates.
pub fn minimize<P: LeastSquares + ?Sized>(
    problem: &P,
    specs: &[ParamSpec],
    initial: &[f64],
    config: &LmConfig,
) -> LmOutcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    assert_eq!(specs.len(), n, "one ParamSpec per parameter");
    assert_eq!(initial.len(), n, "initial guess length");

    let bounds: Vec<(f64, f64)> = specs.iter().map(ParamSpec::internal_bounds).collect();
    let mut theta: Vec<f64> = specs
        .iter()
        .zip(initial)
        .zip(&bounds)
        .map(|((s, &p), &(lo, hi))| s.to_internal(p).clamp(lo, hi))
        .collect();
    let natural = |theta: &[f64]| -> Vec<f64> {
        specs.iter().zip(theta).map(|(s, &t)| s.to_natural(t)).collect()
    };

    let mut params = natural(&theta);
    let mut r = vec![0.0; m];
    problem.residuals(&params, &mut r);
    let mut chi2 = sum_sq(&r);
    let initial_chi2 = chi2;
    let mut jac = DMatrix::zeros(m, n);
    problem.jacobian(&params, &mut jac);

    let mut lambda = config.initial_lambda;
    let mut trial_r = vec![0.0; m];
    let mut iterations = 0;
    let termination = loop {
        if chi2 == 0.0 || chi2 < 1e-28 * m as f64 {
            break Termination::ZeroResidual;
        }
        if scaled_gradient_norm(&jac, &r) < config.gradient_tol {
            break Termination::SmallGradient;
        }
        if iterations >= config.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        // Jacobian in internal coordinates.
        let mut jt = jac.clone();
        for (j, s) in specs.iter().enumerate() {
            let c = s.chain(params[j]);
            jt.column_mut(j).scale_mut(c);
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jt.transpose() * &jt;
        let g = jt.transpose() * &rv;
        let diag: Vec<f64> = (0..n).map(|j| jtj[(j, j)].max(1e-300)).collect();

        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * diag[j];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .zip(&bounds)
                .map(|((&t, &d), &(lo, hi))| (t + d).clamp(lo, hi))
                .collect();
            let moved = trial
                .iter()
                .zip(&theta)
                .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                .fold(0.0, f64::max);
            if moved < 1e-15 {
                small_step = true;
                break;
            }
            let trial_params = natural(&trial);
            problem.residuals(&trial_params, &mut trial_r);
            let trial_chi2 = sum_sq(&trial_r);
            if trial_chi2.is_finite() && trial_chi2 < chi2 {
                let reduction = (chi2 - trial_chi2) / chi2;
                theta = trial;
                params = trial_params;
                std::mem::swap(&mut r, &mut trial_r);
                chi2 = trial_chi2;
                problem.jacobian(&params, &mut jac);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if reduction < config.rel_chi2_tol {
                    small_step = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if small_step {
            break if accepted {
                Termination::RelativeReduction
            } else {
                Termination::SmallStep
            };
        }
        if !accepted {
            break Termination::Stalled;
        }
    };

    let gradient_norm = scaled_gradient_norm(&jac, &r);
    // A stall at a stationary point is still a minimum.
    let termination = match termination {
        Termination::Stalled if gradient_norm < 1e-6 => Termination::SmallStep,
        t => t,
    };
    LmOutcome {
        params,
        initial_chi2,
        chi2,
        residuals: r,
        jacobian: jac,
        iterations,
        termination,
        gradient_norm,
    }
}

/// Central finite-difference Jacobian, used to check analytic derivatives.
pub fn finite_difference_jacobian<P: LeastSquares + ?Sized>(problem: &P, params: &[f64]) -> DMatrix<f64> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut jac = DMatrix::zeros(m, n);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    let mut p = params.to_vec();
    for j in 0..n {
        let h = 1e-6 * params[j].abs().max(1e-12);
        p[j] = params[j] + h;
        problem.residuals(&p, &mut plus);
        p[j] = params[j] - h;
        problem.residuals(&p, &mut minus);
        p[j] = params[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

use nalgebra::{DMatrix, SymmetricEigen};

use super::FitError;

/// Smallest accepted eigenvalue of the column-normalized normal matrix.
const RANK_TOLERANCE: f64 = 1e-13;

/// Gauss–Newton covariance `(JᵀJ)⁻¹` from the Jacobian of normalized
/// residuals `(model − data)/σ` with respect to the natural parameters.
///
/// The normal matrix is equilibrated to unit diagonal before inversion so
/// parameters on wildly different scales (s⁻¹ vs s⁻¹K⁻⁵) are handled alike.
/// A near-singular normal matrix yields [`FitError::RankDeficient`] naming
/// the two parameters that dominate the near-null direction.
pub fn estimate_covariance(jacobian: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>, FitError> {
    let n = jacobian.ncols();
    assert_eq!(names.len(), n);
    let jtj = jacobian.transpose() * jacobian;

    for j in 0..n {
        if !(jtj[(j, j)].is_finite() && jtj[(j, j)] > 0.0) {
            return Err(FitError::RankDeficient {
                first: names[j].clone(),
                second: names[j].clone(),
                direction: (0..n).map(|k| if k == j { 1.0 } else { 0.0 }).collect(),
            });
        }
    }
    let scale: Vec<f64> = (0..n).map(|j| 1.0 / jtj[(j, j)].sqrt()).collect();
    let mut corr = jtj.clone();
    for i in 0..n {
        for j in 0..n {
            corr[(i, j)] *= scale[i] * scale[j];
        }
    }

    let eig = SymmetricEigen::new(corr);
    let (k_min, &lambda_min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one parameter");
    if lambda_min < RANK_TOLERANCE {
        let v = eig.eigenvectors.column(k_min);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
        let second = if n > 1 { order[1] } else { order[0] };
        return Err(FitError::RankDeficient {
            first: names[order[0]].clone(),
            second: names[second].clone(),
            direction: v.iter().copied().collect(),
        });
    }

    let mut inv = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        inv += (v * v.transpose()) / lambda;
    }
    let mut cov = inv;
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] *= scale[i] * scale[j];
        }
    }
    // exact symmetry
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(cov)
}

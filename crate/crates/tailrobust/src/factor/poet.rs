//! Robust principal orthogonal complement thresholding (POET).
//!
//! Under an approximate factor model the covariance splits into a rank-r
//! part carried by the top principal components of a robust pilot and a
//! sparse residual. The residual is adaptively soft-thresholded off the
//! diagonal; the final estimate is the sum of the two parts.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::huber::huber_location;
use crate::linalg::SymMatrix;

/// Diagonal floor applied before forming adaptive thresholds.
const EPS_FLOOR: f64 = 1e-8;

/// Fitted factor structure.
#[derive(Debug, Clone)]
pub struct FactorFit {
    /// Number of factors.
    pub r: usize,
    /// Top-r eigenvalues of the pilot, descending.
    pub lambdas: Vec<f64>,
    /// Loading matrix `B = (lambda_1^(1/2) v_1, ..., lambda_r^(1/2) v_r)`,
    /// `d x r`.
    pub loadings: Array2<f64>,
    /// Thresholded residual covariance.
    pub sigma_eps: SymMatrix,
    /// `V Lambda V^T + sigma_eps`, the final covariance estimate.
    pub sigma_total: SymMatrix,
    /// Coordinates whose residual variance was floored at `1e-8`.
    pub floored_diag: Vec<usize>,
}

/// Robust POET: principal orthogonal complement of the top `r`
/// eigenpairs of `pilot`, adaptive soft thresholding of the residual
/// off-diagonals at `lambda_kl = threshold_lambda sqrt(s_kk s_ll)`, and
/// reassembly. The residual diagonal is never thresholded; negative
/// residual variances are floored at `1e-8` and reported.
pub fn robust_poet(pilot: &SymMatrix, r: usize, threshold_lambda: f64) -> Result<FactorFit> {
    let d = pilot.dim();
    if r == 0 || r >= d {
        return Err(Error::InvalidParameter(format!(
            "factor count r = {r} must satisfy 1 <= r < d = {d}"
        )));
    }
    if !(threshold_lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be nonnegative, got {threshold_lambda}"
        )));
    }
    let eig = pilot.eig()?;
    let lambdas: Vec<f64> = eig.lambdas[..r].to_vec();
    if !(lambdas[r - 1] > 0.0) {
        return Err(Error::Degenerate(format!(
            "eigenvalue {r} of the pilot is {:.3e}; no rank-{r} factor structure",
            lambdas[r - 1]
        )));
    }

    // Low-rank part V Lambda V^T over the top r eigenpairs.
    let mut lowrank = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let mut acc = 0.0;
            for (k, &lam) in lambdas.iter().enumerate() {
                acc += eig.vectors[(i, k)] * lam * eig.vectors[(j, k)];
            }
            lowrank[(i, j)] = acc;
            lowrank[(j, i)] = acc;
        }
    }
    let lowrank = SymMatrix::from_symmetric_unchecked(lowrank);

    // Principal orthogonal complement with floored diagonal.
    let raw_eps = pilot.sub(&lowrank);
    let mut floored_diag = Vec::new();
    let mut diag = vec![0.0; d];
    for k in 0..d {
        let v = raw_eps.get(k, k);
        if v < EPS_FLOOR {
            floored_diag.push(k);
            diag[k] = EPS_FLOOR;
        } else {
            diag[k] = v;
        }
    }

    // Adaptive soft thresholding off the diagonal.
    let mut eps = Array2::zeros((d, d));
    for i in 0..d {
        eps[(i, i)] = diag[i];
        for j in (i + 1)..d {
            let cut = threshold_lambda * (diag[i] * diag[j]).sqrt();
            let z = raw_eps.get(i, j);
            let v = z.signum() * (z.abs() - cut).max(0.0);
            eps[(i, j)] = v;
            eps[(j, i)] = v;
        }
    }
    let sigma_eps = SymMatrix::from_symmetric_unchecked(eps);
    let sigma_total = lowrank.add(&sigma_eps);

    let mut loadings = Array2::zeros((d, r));
    for (k, &lam) in lambdas.iter().enumerate() {
        let s = lam.sqrt();
        for i in 0..d {
            loadings[(i, k)] = s * eig.vectors[(i, k)];
        }
    }

    Ok(FactorFit { r, lambdas, loadings, sigma_eps, sigma_total, floored_diag })
}

/// Robust mean: the Huber location of the sample at threshold `tau`.
pub fn robust_mean(x: &[f64], tau: f64) -> Result<f64> {
    huber_location(x, tau)
}

/// Eigenvalue-ratio heuristic for the factor count:
/// `argmax_{l <= d/2} lambda_l / lambda_(l+1)`. Provided as an optional
/// diagnostic; it is never applied implicitly.
pub fn eigenvalue_ratio_r(pilot: &SymMatrix) -> Result<usize> {
    let d = pilot.dim();
    if d < 2 {
        return Err(Error::InvalidParameter("ratio heuristic needs d >= 2".into()));
    }
    let eig = pilot.eig()?;
    let cap = (d / 2).max(1);
    let mut best = (0usize, f64::NEG_INFINITY);
    for l in 0..cap.min(d - 1) {
        let denom = eig.lambdas[l + 1];
        if denom <= 0.0 {
            // Everything past a nonpositive eigenvalue is noise.
            break;
        }
        let ratio = eig.lambdas[l] / denom;
        if ratio > best.1 {
            best = (l + 1, ratio);
        }
    }
    if best.0 == 0 {
        return Err(Error::Degenerate("no positive leading eigenvalue ratio".into()));
    }
    Ok(best.0)
}

/// The POET threshold rate `w_{n,d} = sqrt(log(d)/n) + d^(-1/2)`.
pub fn poet_threshold_scale(n: usize, d: usize) -> f64 {
    ((d as f64).ln() / n as f64).sqrt() + (d as f64).powf(-0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MatrixNorm;
    use approx::assert_relative_eq;
    use ndarray::Array1;

    fn rank_one_plus_identity(d: usize) -> (SymMatrix, Array1<f64>) {
        // b has norm sqrt(d) so the top eigenvalue separates cleanly.
        let b = Array1::from_shape_fn(d, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
        let mut m = Array2::eye(d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += b[i] * b[j];
            }
        }
        (SymMatrix::from_array(&m).unwrap(), b)
    }

    #[test]
    fn zero_threshold_reconstructs_pilot() {
        let (pilot, _) = rank_one_plus_identity(6);
        let fit = robust_poet(&pilot, 1, 0.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_relative_eq!(fit.sigma_total.get(i, j), pilot.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn huge_threshold_leaves_diagonal_residual() {
        let (pilot, _) = rank_one_plus_identity(5);
        let fit = robust_poet(&pilot, 1, 1e6).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(fit.sigma_eps.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn threshold_monotone_in_lambda() {
        let (pilot, _) = rank_one_plus_identity(6);
        let lams = [0.0, 0.05, 0.2, 1.0, 5.0];
        let mut last_mass = f64::INFINITY;
        let mut last_support = usize::MAX;
        for &l in &lams {
            let fit = robust_poet(&pilot, 1, l).unwrap();
            let mut mass = 0.0;
            let mut support = 0;
            for i in 0..6 {
                for j in 0..6 {
                    if i != j {
                        mass += fit.sigma_eps.get(i, j).abs();
                        support += (fit.sigma_eps.get(i, j) != 0.0) as usize;
                    }
                }
            }
            assert!(mass <= last_mass + 1e-12);
            assert!(support <= last_support);
            last_mass = mass;
            last_support = support;
        }
    }

    #[test]
    fn rejects_rank_without_positive_eigenvalue() {
        let pilot = SymMatrix::from_diag(&[1.0, -0.5, -1.0]);
        assert!(robust_poet(&pilot, 2, 0.1).is_err());
    }

    #[test]
    fn robust_mean_beats_plain_mean_against_outlier() {
        let mut x: Vec<f64> = (0..40).map(|i| (i % 7) as f64 * 0.1).collect();
        x.push(1000.0);
        let mut sorted = x.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let robust = robust_mean(&x, 1.0).unwrap();
        assert!((robust - median).abs() < (mean - median).abs());
    }

    #[test]
    fn ratio_heuristic_finds_rank_one() {
        let (pilot, _) = rank_one_plus_identity(8);
        assert_eq!(eigenvalue_ratio_r(&pilot).unwrap(), 1);
    }

    #[test]
    fn loadings_norms_match_eigenvalues() {
        let (pilot, _) = rank_one_plus_identity(6);
        let fit = robust_poet(&pilot, 1, 0.1).unwrap();
        let norm_sq: f64 = fit.loadings.column(0).iter().map(|v| v * v).sum();
        assert_relative_eq!(norm_sq, fit.lambdas[0], epsilon = 1e-10);
        assert!(fit.sigma_total.norm(MatrixNorm::Max).is_finite());
    }
}

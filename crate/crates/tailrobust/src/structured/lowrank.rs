//! Trace-norm penalized low-rank covariance estimation.
//!
//! The penalized program `argmin_{A PSD} (1/2)|A - pilot|_F^2 + gamma |A|_tr`
//! has a closed form: soft-threshold the pilot's eigenvalues at `gamma` and
//! keep the eigenvectors.

use crate::error::{Error, Result};
use crate::linalg::{DataSample, SymMatrix};
use crate::truncated::spectrum_truncated;
use crate::tuning::{solve_spectral_tau, TuneResult};

/// Penalty and pilot threshold for the low-rank pipeline.
#[derive(Debug, Clone, Copy)]
pub struct TracePenaltyConfig {
    /// Trace-norm penalty, `gamma >= 0`.
    pub gamma: f64,
    /// Spectral truncation threshold for the pilot estimator.
    pub tau: f64,
}

impl TracePenaltyConfig {
    pub fn new(gamma: f64, tau: f64) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        Ok(TracePenaltyConfig { gamma, tau })
    }

    /// Data-driven defaults: `tau` from the spectral tuning equation and
    /// `gamma = 2 tau (log(2d) + t) / m`, the penalty bound expressed
    /// through the plug-in threshold (`v = tau sqrt((log(2d)+t)/m)`).
    pub fn adaptive(x: &DataSample, t: f64) -> Result<Self> {
        let TuneResult { tau, .. } = solve_spectral_tau(x, t)?;
        let m = x.half_count() as f64;
        let gamma = 2.0 * tau * ((2.0 * x.dim() as f64).ln() + t) / m;
        TracePenaltyConfig::new(gamma, tau)
    }
}

/// Closed-form solution of the trace-penalized program:
/// `sum_k max(lambda_k - gamma, 0) v_k v_k^T` over the pilot's spectrum.
///
/// The output is PSD with rank at most `#{lambda_k(pilot) > gamma}`; with
/// `gamma = 0` and a PSD pilot it reproduces the pilot.
pub fn lowrank_covariance(pilot: &SymMatrix, gamma: f64) -> Result<SymMatrix> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be nonnegative, got {gamma}")));
    }
    let eig = pilot.eig()?;
    Ok(eig.reconstruct_with(|l| (l - gamma).max(0.0)))
}

/// Full pipeline: spectrum-wise truncated pilot at `cfg.tau`, then the
/// eigenvalue soft-threshold at `cfg.gamma`.
pub fn lowrank_from_data(x: &DataSample, cfg: &TracePenaltyConfig) -> Result<SymMatrix> {
    let pilot = spectrum_truncated(x, cfg.tau)?;
    lowrank_covariance(&pilot, cfg.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MatrixNorm;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn eigen_soft_threshold_diag() {
        let pilot = SymMatrix::from_diag(&[3.0, 1.0]);
        let out = lowrank_covariance(&pilot, 1.0).unwrap();
        assert_relative_eq!(out.get(0, 0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(out.get(1, 1), 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.get(0, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_above_top_eigenvalue_gives_zero() {
        let pilot = SymMatrix::from_array(&array![[2.0, 0.5], [0.5, 1.0]]).unwrap();
        let top = pilot.norm(MatrixNorm::Spectral);
        let out = lowrank_covariance(&pilot, top + 0.1).unwrap();
        assert_eq!(out.norm(MatrixNorm::Max), 0.0);
    }

    #[test]
    fn gamma_zero_keeps_psd_pilot() {
        let a = array![[1.0, 0.3, -0.1], [0.3, 2.0, 0.2], [-0.1, 0.2, 1.5]];
        let pilot = SymMatrix::from_array(&a).unwrap();
        let out = lowrank_covariance(&pilot, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(out.get(i, j), pilot.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalue_shift_identity() {
        let a = array![[1.0, -0.4, 0.2], [-0.4, 0.8, 0.1], [0.2, 0.1, 1.6]];
        let pilot = SymMatrix::from_array(&a).unwrap();
        let gamma = 0.35;
        let out = lowrank_covariance(&pilot, gamma).unwrap();
        let in_eig = pilot.eig().unwrap();
        let out_eig = out.eig().unwrap();
        for (li, lo) in in_eig.lambdas.iter().zip(&out_eig.lambdas) {
            assert_relative_eq!((li - gamma).max(0.0), *lo, epsilon = 1e-9);
        }
        // |output - pilot|_2 <= gamma + |min(lambda_min, 0)|.
        let diff = out.sub(&pilot).norm(MatrixNorm::Spectral);
        let lam_min = in_eig.lambdas.last().copied().unwrap();
        assert!(diff <= gamma + lam_min.min(0.0).abs() + 1e-10);
    }
}

//! Factor-adjusted approximate false discovery proportion.
//!
//! For simultaneous tests `H_0k : mu_k = 0`, the statistics are
//! `T_k = sqrt(n) mu_hat_k` with Huber means `mu_hat_k`. The unobservable
//! FDP is approximated by a Gaussian plug-in adjusted for the common
//! factors: loadings come from the top-r eigenpairs of a robust pilot
//! covariance, and the scaled factor average from regressing the sample
//! mean on the loadings.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::huber::huber_location;
use crate::linalg::{DataSample, SymMatrix};
use crate::tuning::{adaptive_elementwise_truncated, adaptive_huber_covariance, default_t, HuberSystemConfig};

/// Floor for the residual variances in the plug-in denominators.
const EPS_FLOOR: f64 = 1e-8;

/// Pilot covariance estimator for the FDP pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdpPilot {
    /// Data-adaptive Huber covariance (the default).
    AdaptiveHuber,
    /// Adaptive element-wise truncated covariance.
    AdaptiveTruncated,
}

/// Settings for [`estimate_fdp`].
#[derive(Debug, Clone)]
pub struct FdpConfig {
    pub pilot: FdpPilot,
    /// Confidence parameter for pilot tuning; `None` means `log n`.
    pub t: Option<f64>,
}

impl Default for FdpConfig {
    fn default() -> Self {
        FdpConfig { pilot: FdpPilot::AdaptiveHuber, t: None }
    }
}

/// Estimated approximate-FDP curve over a threshold grid.
#[derive(Debug, Clone)]
pub struct FdpCurve {
    /// Threshold grid, nonnegative ascending.
    pub z_grid: Vec<f64>,
    /// `FDP_hat(z)`, clamped to `[0, 1]`; `0/0` counts as 0.
    pub fdp_hat: Vec<f64>,
    /// Discovery counts `R(z) = #{|T_k| >= z}`.
    pub discoveries: Vec<usize>,
    /// Robust test statistics `T_k = sqrt(n) mu_hat_k`.
    pub statistics: Vec<f64>,
    /// Coordinates whose residual variance was floored.
    pub floored_eps: Vec<usize>,
}

impl FdpCurve {
    /// CSV with columns `z, R, fdp_hat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,R,fdp_hat\n");
        for ((z, r), f) in self.z_grid.iter().zip(&self.discoveries).zip(&self.fdp_hat) {
            out.push_str(&format!("{z},{r},{f}\n"));
        }
        out
    }
}

/// Estimate the approximate FDP over `z_grid` for an `r`-factor model.
///
/// Per-coordinate test statistics use Huber means with
/// `tau_k = sigma_kk^(1/2) sqrt(n / log(nd))`; the plug-in sums
/// `Phi((-z + b_k' u)/s_k) + Phi((-z - b_k' u)/s_k)` run over all `d`
/// coordinates with `s_k^2 = sigma_kk - |b_k|^2` floored at `1e-8`.
pub fn estimate_fdp(
    x: &DataSample,
    r: usize,
    z_grid: &[f64],
    cfg: &FdpConfig,
) -> Result<FdpCurve> {
    let d = x.dim();
    let n = x.n();
    if r == 0 || r >= d {
        return Err(Error::InvalidParameter(format!(
            "factor count r = {r} must satisfy 1 <= r < d = {d}"
        )));
    }
    if z_grid.is_empty() {
        return Err(Error::InvalidParameter("empty threshold grid".into()));
    }
    if z_grid.iter().any(|&z| !(z >= 0.0)) || z_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "threshold grid must be nonnegative and ascending".into(),
        ));
    }

    let t = cfg.t.unwrap_or_else(|| default_t(n));
    let pilot = match cfg.pilot {
        FdpPilot::AdaptiveHuber => {
            adaptive_huber_covariance(x, t, &HuberSystemConfig::default())?.sigma
        }
        FdpPilot::AdaptiveTruncated => adaptive_elementwise_truncated(x, t)?.sigma,
    };

    // Robust test statistics T_k = sqrt(n) * huber_mean(column k).
    let sqrt_n = (n as f64).sqrt();
    let log_nd = ((n as f64) * (d as f64)).ln();
    let statistics: Vec<f64> = (0..d)
        .into_par_iter()
        .map(|k| {
            let col = x.column_vec(k);
            let scale = pilot.get(k, k).max(EPS_FLOOR).sqrt();
            let tau = scale * (n as f64 / log_nd).sqrt();
            huber_location(&col, tau).map(|mu| sqrt_n * mu)
        })
        .collect::<Result<Vec<f64>>>()?;

    // Loadings from the top-r eigenpairs.
    let eig = pilot.eig()?;
    if !(eig.lambdas[r - 1] > 0.0) {
        return Err(Error::Degenerate(format!(
            "eigenvalue {r} of the pilot is {:.3e}; loading matrix is rank-deficient",
            eig.lambdas[r - 1]
        )));
    }
    let mut loadings = Array2::zeros((d, r));
    for k in 0..r {
        let s = eig.lambdas[k].sqrt();
        for i in 0..d {
            loadings[(i, k)] = s * eig.vectors[(i, k)];
        }
    }

    // u = sqrt(n) (B'B)^-1 B' xbar; B'B = diag(lambda_1..r) up to
    // round-off, inverted through its eigensystem for safety.
    let xbar = x.values().mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let btb = SymMatrix::from_array(&loadings.t().dot(&loadings))?;
    let btb_eig = btb.eig()?;
    if !(btb_eig.lambdas[r - 1] > 0.0) {
        return Err(Error::Degenerate("B'B is singular".into()));
    }
    let btb_inv = btb_eig.reconstruct_with(|l| 1.0 / l);
    let bt_xbar = loadings.t().dot(&xbar);
    let u: Array1<f64> = btb_inv.as_array().dot(&bt_xbar) * sqrt_n;

    // Residual variances s_k^2 = sigma_kk - |b_k|^2, floored.
    let mut floored_eps = Vec::new();
    let mut adj = Vec::with_capacity(d);
    let mut s_eps = Vec::with_capacity(d);
    for k in 0..d {
        let b_k = loadings.row(k);
        let proj: f64 = b_k.dot(&u);
        let norm_sq: f64 = b_k.iter().map(|v| v * v).sum();
        let var = pilot.get(k, k) - norm_sq;
        let var = if var < EPS_FLOOR {
            floored_eps.push(k);
            EPS_FLOOR
        } else {
            var
        };
        adj.push(proj);
        s_eps.push(var.sqrt());
    }

    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut fdp_hat = Vec::with_capacity(z_grid.len());
    let mut discoveries = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let r_z = statistics.iter().filter(|t| t.abs() >= z).count();
        discoveries.push(r_z);
        if r_z == 0 {
            fdp_hat.push(0.0);
            continue;
        }
        let mut numer = 0.0;
        for k in 0..d {
            numer += normal.cdf((-z + adj[k]) / s_eps[k]) + normal.cdf((-z - adj[k]) / s_eps[k]);
        }
        fdp_hat.push((numer / r_z as f64).clamp(0.0, 1.0));
    }

    Ok(FdpCurve { z_grid: z_grid.to_vec(), fdp_hat, discoveries, statistics, floored_eps })
}

/// The population approximate FDP for a known model: loadings `b`, scaled
/// factor average `sqrt(n) fbar`, total variances `sigma_kk`, evaluated on
/// the statistics `t_k`. Used by simulations that can observe the truth.
pub fn approximate_fdp_target(
    loadings: &Array2<f64>,
    sqrt_n_fbar: &Array1<f64>,
    sigma_diag: &[f64],
    statistics: &[f64],
    z: f64,
) -> f64 {
    let d = sigma_diag.len();
    let r_z = statistics.iter().filter(|t| t.abs() >= z).count();
    if r_z == 0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut numer = 0.0;
    for k in 0..d {
        let b_k = loadings.row(k);
        let proj: f64 = b_k.dot(sqrt_n_fbar);
        let norm_sq: f64 = b_k.iter().map(|v| v * v).sum();
        let s = (sigma_diag[k] - norm_sq).max(EPS_FLOOR).sqrt();
        numer += normal.cdf((-z + proj) / s) + normal.cdf((-z - proj) / s);
    }
    (numer / r_z as f64).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn factor_sample(n: usize, d: usize, r: usize, seed: u64) -> DataSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Array2::zeros((d, r));
        for k in 0..d {
            for l in 0..r {
                // Deterministic well-spread loadings with |b_k| < 1.
                b[(k, l)] = 0.6 * ((k * (l + 1)) as f64 * 0.7).sin() / (r as f64).sqrt();
            }
        }
        let mut x = Array2::zeros((n, d));
        for i in 0..n {
            let f: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
            for k in 0..d {
                let mut v: f64 = StandardNormal.sample(&mut rng);
                for l in 0..r {
                    v += b[(k, l)] * f[l];
                }
                x[(i, k)] = v;
            }
        }
        DataSample::new(x).unwrap()
    }

    #[test]
    fn fdp_at_zero_is_one_for_pure_noise() {
        let x = factor_sample(60, 12, 2, 5);
        let curve = estimate_fdp(&x, 2, &[0.0], &FdpConfig::default()).unwrap();
        // R(0) = d and Phi(a) + Phi(-a) = 1 summed over d coordinates.
        assert_eq!(curve.discoveries[0], 12);
        assert!((curve.fdp_hat[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_discoveries_give_zero_by_convention() {
        let x = factor_sample(60, 12, 2, 6);
        let zmax = curve_max_stat(&x) + 1.0;
        let curve = estimate_fdp(&x, 2, &[zmax], &FdpConfig::default()).unwrap();
        assert_eq!(curve.discoveries[0], 0);
        assert_eq!(curve.fdp_hat[0], 0.0);
    }

    fn curve_max_stat(x: &DataSample) -> f64 {
        let curve = estimate_fdp(x, 2, &[0.0], &FdpConfig::default()).unwrap();
        curve.statistics.iter().fold(0.0f64, |m, t| m.max(t.abs()))
    }

    #[test]
    fn discoveries_non_increasing_and_counted_exactly() {
        let x = factor_sample(50, 10, 1, 9);
        let grid = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
        let curve = estimate_fdp(&x, 1, &grid, &FdpConfig::default()).unwrap();
        let mut last = usize::MAX;
        for (zi, &z) in grid.iter().enumerate() {
            let direct = curve.statistics.iter().filter(|t| t.abs() >= z).count();
            assert_eq!(curve.discoveries[zi], direct);
            assert!(curve.discoveries[zi] <= last);
            last = curve.discoveries[zi];
        }
    }

    #[test]
    fn sign_flip_invariance() {
        let x = factor_sample(40, 8, 1, 11);
        let flipped = DataSample::new(x.values().mapv(|v| -v)).unwrap();
        let grid = [0.0, 0.8, 1.6];
        let a = estimate_fdp(&x, 1, &grid, &FdpConfig::default()).unwrap();
        let b = estimate_fdp(&flipped, 1, &grid, &FdpConfig::default()).unwrap();
        for (fa, fb) in a.fdp_hat.iter().zip(&b.fdp_hat) {
            assert!((fa - fb).abs() < 1e-9, "{fa} vs {fb}");
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let x = factor_sample(40, 8, 1, 12);
        let curve = estimate_fdp(&x, 1, &[0.0, 1.0], &FdpConfig::default()).unwrap();
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "z,R,fdp_hat");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn rejects_bad_grid_and_rank() {
        let x = factor_sample(40, 8, 1, 13);
        assert!(estimate_fdp(&x, 0, &[0.0], &FdpConfig::default()).is_err());
        assert!(estimate_fdp(&x, 8, &[0.0], &FdpConfig::default()).is_err());
        assert!(estimate_fdp(&x, 1, &[], &FdpConfig::default()).is_err());
        assert!(estimate_fdp(&x, 1, &[1.0, 0.5], &FdpConfig::default()).is_err());
        assert!(estimate_fdp(&x, 1, &[-1.0], &FdpConfig::default()).is_err());
    }
}

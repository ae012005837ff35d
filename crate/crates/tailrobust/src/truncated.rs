//! Element-wise and spectrum-wise truncated covariance estimators.
//!
//! Both estimators average over the pairwise differences `Y = X_i - X_j`,
//! which removes the mean without estimating it. The element-wise variant
//! clips each pair product `Y_k Y_l / 2` at a per-entry threshold; the
//! spectrum-wise variant clips the sole eigenvalue `|Y|^2 / 2` of each
//! rank-one pair matrix `Y Y^T / 2`.
//!
//! `tau = +inf` is an admissible sentinel meaning "no truncation", which
//! makes the sample covariance the limiting member of both families.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels;
use crate::linalg::{DataSample, SymMatrix};

/// Truncation operator `psi_tau(u) = (|u| ^ tau) sign(u)`.
///
/// Odd, bounded by `tau`, and the identity on `[-tau, tau]`.
#[inline]
pub fn psi(u: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0);
    u.clamp(-tau, tau)
}

/// Symmetric matrix of per-entry truncation thresholds `tau_kl`, each in
/// `(0, +inf]`. `+inf` disables truncation for that entry.
#[derive(Debug, Clone)]
pub struct TruncationMatrix {
    taus: Array2<f64>,
}

impl TruncationMatrix {
    pub fn from_entries(taus: Array2<f64>) -> Result<Self> {
        let (r, c) = taus.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, actual: c });
        }
        let mut sym = Array2::zeros((r, r));
        for i in 0..r {
            for j in i..r {
                let v = taus[(i, j)];
                let w = taus[(j, i)];
                if v != w {
                    return Err(Error::InvalidParameter(format!(
                        "truncation matrix not symmetric at ({i}, {j})"
                    )));
                }
                if !(v > 0.0) || v.is_nan() {
                    return Err(Error::InvalidParameter(format!(
                        "truncation threshold at ({i}, {j}) must be positive, got {v}"
                    )));
                }
                sym[(i, j)] = v;
                sym[(j, i)] = v;
            }
        }
        Ok(TruncationMatrix { taus: sym })
    }

    /// Every entry set to the same threshold.
    pub fn uniform(d: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || tau.is_nan() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        Ok(TruncationMatrix { taus: Array2::from_elem((d, d), tau) })
    }

    /// No truncation anywhere; the associated estimators reduce to the
    /// sample covariance.
    pub fn infinite(d: usize) -> Self {
        TruncationMatrix { taus: Array2::from_elem((d, d), f64::INFINITY) }
    }

    pub fn dim(&self) -> usize {
        self.taus.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.taus[(i, j)]
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.taus
    }
}

/// Which population functional the matrix `V = (v_kl)` carries.
///
/// The truncated estimator is calibrated from raw second moments
/// `v_kl^2 = E (Y_k Y_l / 2)^2`, the Huber M-estimator from pair-product
/// variances `v_kl^2 = var((X_1k - X_2k)(X_1l - X_2l) / 2)`. The two are
/// not interchangeable, so the carrier records which one it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentConvention {
    RawSecondMoment,
    PairVariance,
}

/// Symmetric matrix of nonnegative moment scales `v_kl`.
#[derive(Debug, Clone)]
pub struct SecondMomentMatrix {
    v: Array2<f64>,
    convention: MomentConvention,
}

impl SecondMomentMatrix {
    pub fn new(v: Array2<f64>, convention: MomentConvention) -> Result<Self> {
        let (r, c) = v.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, actual: c });
        }
        for i in 0..r {
            for j in i..r {
                let val = v[(i, j)];
                if val != v[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "moment matrix not symmetric at ({i}, {j})"
                    )));
                }
                if !(val >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "moment entry at ({i}, {j}) must be nonnegative, got {val}"
                    )));
                }
            }
        }
        Ok(SecondMomentMatrix { v, convention })
    }

    /// Plug-in estimate of the raw second moments
    /// `v_kl = sqrt((1/N) sum (Y_k Y_l / 2)^2)`.
    pub fn estimate_raw(x: &DataSample) -> Self {
        let v = pairwise_moment_matrix(x, |z| {
            let n = z.len() as f64;
            (z.iter().map(|&t| t * t).sum::<f64>() / n).sqrt()
        });
        SecondMomentMatrix { v, convention: MomentConvention::RawSecondMoment }
    }

    /// Plug-in estimate of the pair-product variances
    /// `v_kl = sqrt(var(Y_k Y_l / 2))`.
    pub fn estimate_pair_variance(x: &DataSample) -> Self {
        let v = pairwise_moment_matrix(x, |z| {
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            (z.iter().map(|&t| (t - mean) * (t - mean)).sum::<f64>() / n).sqrt()
        });
        SecondMomentMatrix { v, convention: MomentConvention::PairVariance }
    }

    pub fn convention(&self) -> MomentConvention {
        self.convention
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[(i, j)]
    }
}

fn pairwise_moment_matrix(x: &DataSample, stat: impl Fn(&[f64]) -> f64 + Sync) -> Array2<f64> {
    let d = x.dim();
    let cols = x.columns_major();
    let pairs = upper_triangle_indices(d);
    let vals: Vec<f64> = pairs
        .par_iter()
        .map_init(Vec::new, |buf, &(k, l)| {
            kernels::fill_pair_products(
                cols.row(k).as_slice().unwrap(),
                cols.row(l).as_slice().unwrap(),
                buf,
            );
            stat(buf)
        })
        .collect();
    let mut out = Array2::zeros((d, d));
    for (&(k, l), &v) in pairs.iter().zip(&vals) {
        out[(k, l)] = v;
        out[(l, k)] = v;
    }
    out
}

pub(crate) fn upper_triangle_indices(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(d * (d + 1) / 2);
    for k in 0..d {
        for l in k..d {
            pairs.push((k, l));
        }
    }
    pairs
}

/// Element-wise truncated covariance estimator
/// `sigma_kl = (1/N) sum_i psi_{tau_kl}(Y_ik Y_il / 2)`.
pub fn elementwise_truncated(x: &DataSample, gamma: &TruncationMatrix) -> Result<SymMatrix> {
    let d = x.dim();
    if gamma.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: gamma.dim() });
    }
    let n_pairs = x.pair_count() as f64;
    let cols = x.columns_major();
    let pairs = upper_triangle_indices(d);
    let vals: Vec<f64> = pairs
        .par_iter()
        .map_init(Vec::new, |buf, &(k, l)| {
            kernels::fill_pair_products(
                cols.row(k).as_slice().unwrap(),
                cols.row(l).as_slice().unwrap(),
                buf,
            );
            kernels::clamped_sum(buf, gamma.get(k, l)) / n_pairs
        })
        .collect();
    let mut out = Array2::zeros((d, d));
    for (&(k, l), &v) in pairs.iter().zip(&vals) {
        out[(k, l)] = v;
        out[(l, k)] = v;
    }
    Ok(SymMatrix::from_symmetric_unchecked(out))
}

/// Theoretically calibrated truncation thresholds
/// `tau_kl = v_kl sqrt(m / (2 log d + log(1/delta)))` with `m = floor(n/2)`.
///
/// Entries with `v_kl = 0` get `tau = +inf`: a degenerate coordinate never
/// needs clipping.
pub fn theoretical_gamma(
    v: &SecondMomentMatrix,
    n: usize,
    delta: f64,
) -> Result<TruncationMatrix> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0, 1), got {delta}")));
    }
    if n < 2 {
        return Err(Error::InsufficientData { required: 2, actual: n });
    }
    let d = v.dim();
    let m = (n / 2) as f64;
    let denom = 2.0 * (d as f64).ln() + (1.0 / delta).ln();
    let scale = (m / denom).sqrt();
    let mut taus = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let vij = v.get(i, j);
            taus[(i, j)] = if vij > 0.0 { vij * scale } else { f64::INFINITY };
        }
    }
    Ok(TruncationMatrix { taus })
}

/// Theoretically calibrated spectral threshold
/// `tau = v sqrt(m / (log(2d) + log(1/delta)))`.
pub fn theoretical_spectral_tau(v: f64, n: usize, d: usize, delta: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("v must be positive, got {v}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0, 1), got {delta}")));
    }
    if n < 2 {
        return Err(Error::InsufficientData { required: 2, actual: n });
    }
    let m = (n / 2) as f64;
    Ok(v * (m / ((2.0 * d as f64).ln() + (1.0 / delta).ln())).sqrt())
}

/// Spectrum-wise truncated covariance estimator
/// `(1/N) sum_i psi_tau(Y_i Y_i^T / 2)`.
///
/// Each pair matrix is rank one with eigenvalue `|Y|^2 / 2`, so the matrix
/// functional reduces to scaling: the summand is
/// `psi_tau(|Y|^2 / 2) * Y Y^T / |Y|^2`, and a zero pair (duplicate rows)
/// contributes the zero matrix. The output is PSD with each summand's
/// spectral norm at most `tau`.
pub fn spectrum_truncated(x: &DataSample, tau: f64) -> Result<SymMatrix> {
    if !(tau > 0.0) || tau.is_nan() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let acc = weighted_pair_gram(x, |sq_half| {
        if sq_half > 0.0 {
            psi(sq_half, tau) / (2.0 * sq_half)
        } else {
            0.0
        }
    });
    let n_pairs = x.pair_count() as f64;
    Ok(acc.scale(1.0 / n_pairs))
}

/// `sum_i w(|Y_i|^2 / 2) * Y_i Y_i^T` over all pairs.
///
/// The weight callback receives `|Y|^2 / 2` and must return a nonnegative
/// factor. Every pair difference lies in the row space of the panel, so
/// the sum equals `X^T L X` with `L` the `n x n` weighted Laplacian of the
/// complete pair graph; that turns the `O(N d^2)` accumulation into two
/// matrix products. Deterministic independent of the thread count.
pub(crate) fn weighted_pair_gram(x: &DataSample, weight: impl Fn(f64) -> f64 + Sync) -> SymMatrix {
    let n = x.n();
    let d = x.dim();
    let values = x.values();
    let flat = values.as_slice().expect("row-major panel");

    let mut lap = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let xi = &flat[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let xj = &flat[j * d..(j + 1) * d];
            let mut norm_sq = 0.0;
            for c in 0..d {
                let diff = xi[c] - xj[c];
                norm_sq += diff * diff;
            }
            let w = weight(0.5 * norm_sq);
            debug_assert!(w >= 0.0);
            if w != 0.0 {
                lap[(i, j)] -= w;
                lap[(j, i)] -= w;
                lap[(i, i)] += w;
                lap[(j, j)] += w;
            }
        }
    }

    let lx = lap.dot(values);
    let acc = values.t().dot(&lx);
    // Mirror the upper triangle so symmetry is exact despite round-off in
    // the matrix products.
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let v = 0.5 * (acc[(i, j)] + acc[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    SymMatrix::from_symmetric_unchecked(out)
}

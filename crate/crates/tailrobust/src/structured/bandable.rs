//! Bandable covariance estimation via overlapping block embedding.
//!
//! A bandable matrix decomposes, up to the off-band remainder, into a
//! telescoping sum of principal submatrices of widths `2q` and `q`. Each
//! submatrix is estimated by the spectrum-wise truncated estimator on the
//! corresponding coordinate slice, with the threshold tuned per block, and
//! embedded back at its position. Blocks that protrude past the index
//! range are clipped to it, which preserves the telescoping identity.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{DataSample, SymMatrix};
use crate::truncated::spectrum_truncated;
use crate::tuning::solve_spectral_tau;

/// Bandwidth and per-block confidence for the bandable estimator.
#[derive(Debug, Clone, Copy)]
pub struct BandableConfig {
    /// Block bandwidth `q`, `1 <= q <= d`.
    pub q: usize,
    /// Exponent in the per-block confidence `delta = (n^c0 d)^-1`.
    pub c0: f64,
}

impl BandableConfig {
    pub fn with_bandwidth(q: usize) -> Self {
        BandableConfig { q, c0: 1.0 }
    }

    /// Bandwidth from a known decay exponent:
    /// `q = clamp(round((n / log(nd))^(1/(2 alpha + 1))), 1, d)`.
    pub fn from_decay(alpha: f64, n: usize, d: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let ratio = n as f64 / ((n as f64) * (d as f64)).ln();
        let q = ratio.powf(1.0 / (2.0 * alpha + 1.0)).round() as usize;
        Ok(BandableConfig { q: q.clamp(1, d), c0: 1.0 })
    }
}

/// Embed a `q x q` symmetric block into a `d x d` zero matrix with its
/// top-left corner at `(start, start)`.
pub fn embed(a: &SymMatrix, start: usize, d: usize) -> Result<SymMatrix> {
    let q = a.dim();
    if start + q > d {
        return Err(Error::InvalidParameter(format!(
            "block of width {q} at position {start} does not fit in dimension {d}"
        )));
    }
    let mut out = Array2::zeros((d, d));
    for i in 0..q {
        for j in 0..q {
            out[(start + i, start + j)] = a.get(i, j);
        }
    }
    Ok(SymMatrix::from_symmetric_unchecked(out))
}

/// Spectrum-wise truncated estimator of a principal submatrix.
///
/// The requested range `[start, start + width)` may protrude below zero or
/// past `d`; it is clipped to the valid index range and the block shrinks
/// accordingly. The threshold solves the spectral tuning equation on the
/// slice with `t = log(1/delta)`. Returns the clipped estimate together
/// with its clipped start position.
pub fn block_truncated(
    x: &DataSample,
    start: isize,
    width: usize,
    delta: f64,
) -> Result<(SymMatrix, usize)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0, 1), got {delta}")));
    }
    let d = x.dim() as isize;
    let lo = start.max(0);
    let hi = (start + width as isize).min(d);
    if hi <= lo {
        return Err(Error::InvalidParameter(format!(
            "block [{start}, {}) lies entirely outside 0..{d}",
            start + width as isize
        )));
    }
    let (cs, cw) = (lo as usize, (hi - lo) as usize);
    let slice = x.slice_vars(cs, cw)?;
    let t = (1.0 / delta).ln();
    let tuned = solve_spectral_tau(&slice, t)?;
    let est = spectrum_truncated(&slice, tuned.tau)?;
    Ok((est, cs))
}

/// Bandable covariance estimator: the telescoping block sum
/// `sum_{j=-1..J} E(block(jq, 2q)) - sum_{j=0..J} E(block(jq, q))`
/// with `J = ceil((d-1)/q)`, block positions zero-based and every block
/// clipped to the index range. Entries with `|k - l| >= 2q` are exactly
/// zero by construction.
pub fn bandable_covariance(x: &DataSample, cfg: &BandableConfig) -> Result<SymMatrix> {
    let d = x.dim();
    let n = x.n();
    let q = cfg.q;
    if q == 0 || q > d {
        return Err(Error::InvalidParameter(format!("bandwidth q = {q} out of range 1..={d}")));
    }
    let delta = 1.0 / ((n as f64).powf(cfg.c0) * d as f64);
    let big_j = (d - 1).div_ceil(q) as isize;

    // (start, width, sign)
    let mut blocks: Vec<(isize, usize, f64)> = Vec::new();
    for j in -1..=big_j {
        blocks.push((j * q as isize, 2 * q, 1.0));
    }
    for j in 0..=big_j {
        blocks.push((j * q as isize, q, -1.0));
    }

    let parts: Vec<Result<Option<(SymMatrix, usize, f64)>>> = blocks
        .par_iter()
        .map(|&(start, width, sign)| {
            // Blocks entirely outside the range contribute nothing.
            if start + (width as isize) <= 0 || start >= d as isize {
                return Ok(None);
            }
            let (est, cs) = block_truncated(x, start, width, delta)
                .map_err(|e| Error::BlockFailure { start, source: Box::new(e) })?;
            Ok(Some((est, cs, sign)))
        })
        .collect();

    let mut acc = Array2::<f64>::zeros((d, d));
    for part in parts {
        if let Some((est, cs, sign)) = part? {
            let w = est.dim();
            for i in 0..w {
                for j in 0..w {
                    acc[(cs + i, cs + j)] += sign * est.get(i, j);
                }
            }
        }
    }
    Ok(SymMatrix::from_symmetric_unchecked(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn embed_identity_position() {
        let a = SymMatrix::from_array(&array![[1.0, 2.0], [2.0, 3.0]]).unwrap();
        let out = embed(&a, 0, 2).unwrap();
        assert_eq!(out.as_array(), a.as_array());
    }

    #[test]
    fn embed_single_entry() {
        let a = SymMatrix::from_diag(&[1.0]);
        let out = embed(&a, 2, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (2, 2) { 1.0 } else { 0.0 };
                assert_eq!(out.get(i, j), expect);
            }
        }
    }

    #[test]
    fn embed_is_linear() {
        let a = SymMatrix::from_array(&array![[1.0, 0.5], [0.5, 2.0]]).unwrap();
        let b = SymMatrix::from_array(&array![[-1.0, 0.25], [0.25, 1.0]]).unwrap();
        let lhs = embed(&a, 1, 4).unwrap().add(&embed(&b, 1, 4).unwrap());
        let rhs = embed(&a.add(&b), 1, 4).unwrap();
        assert_eq!(lhs.as_array(), rhs.as_array());
    }

    #[test]
    fn embed_out_of_range_errors() {
        let a = SymMatrix::from_diag(&[1.0, 2.0]);
        assert!(embed(&a, 3, 4).is_err());
    }

    #[test]
    fn overlapping_embeds_assemble_banded_matrix() {
        let b1 = SymMatrix::from_array(&array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let b2 = SymMatrix::from_array(&array![[2.0, 0.25], [0.25, 2.0]]).unwrap();
        let sum = embed(&b1, 0, 3).unwrap().add(&embed(&b2, 1, 3).unwrap());
        let direct = SymMatrix::from_array(&array![
            [1.0, 0.5, 0.0],
            [0.5, 3.0, 0.25],
            [0.0, 0.25, 2.0],
        ])
        .unwrap();
        assert_eq!(sum.as_array(), direct.as_array());
    }

    fn toy_sample(n: usize, d: usize) -> DataSample {
        let mut state = 0xabcdef0123456789u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        DataSample::new(Array2::from_shape_fn((n, d), |_| next())).unwrap()
    }

    #[test]
    fn full_width_block_matches_spectrum_truncated() {
        let x = toy_sample(20, 4);
        let delta = 0.05;
        let (block, cs) = block_truncated(&x, 0, 4, delta).unwrap();
        assert_eq!(cs, 0);
        let t = (1.0 / delta).ln();
        let tau = solve_spectral_tau(&x, t).unwrap().tau;
        let full = spectrum_truncated(&x, tau).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(block.get(i, j), full.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn width_one_block_is_truncated_variance() {
        let x = toy_sample(20, 4);
        let delta = 0.05;
        let (block, cs) = block_truncated(&x, 2, 1, delta).unwrap();
        assert_eq!((block.dim(), cs), (1, 2));
        let slice = x.slice_vars(2, 1).unwrap();
        let tau = solve_spectral_tau(&slice, (1.0 / delta).ln()).unwrap().tau;
        let direct = spectrum_truncated(&slice, tau).unwrap();
        assert_relative_eq!(block.get(0, 0), direct.get(0, 0), epsilon = 1e-12);
    }

    #[test]
    fn band_support_is_exact() {
        let x = toy_sample(18, 9);
        let cfg = BandableConfig::with_bandwidth(2);
        let est = bandable_covariance(&x, &cfg).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                if (i as isize - j as isize).unsigned_abs() >= 4 {
                    assert_eq!(est.get(i, j), 0.0, "entry ({i},{j}) outside band not zero");
                }
            }
        }
    }

    #[test]
    fn q_equal_d_reduces_to_single_block() {
        // Both 2q-blocks clip to the full range and one q-block cancels,
        // leaving exactly one full-range block estimate.
        let x = toy_sample(14, 3);
        let cfg = BandableConfig::with_bandwidth(3);
        let est = bandable_covariance(&x, &cfg).unwrap();
        let delta = 1.0 / ((14.0f64).powf(cfg.c0) * 3.0);
        let (block, _) = block_truncated(&x, 0, 3, delta).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(est.get(i, j), block.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn decay_bandwidth_clamped() {
        let cfg = BandableConfig::from_decay(0.5, 100, 4).unwrap();
        assert!(cfg.q >= 1 && cfg.q <= 4);
    }
}

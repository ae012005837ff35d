//! Median-of-means covariance estimator.
//!
//! The observations are split into `k` contiguous groups; the estimate is
//! the entrywise median of the per-group sample covariances. No tuning
//! parameter beyond `k`, at the price of a sixth-moment requirement.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, DataSample, SymMatrix};

/// Group count for the median-of-means split.
#[derive(Debug, Clone, Copy)]
pub struct MomConfig {
    pub k: usize,
}

impl MomConfig {
    pub fn new(k: usize) -> Self {
        MomConfig { k }
    }

    /// `k = max(1, round(sqrt(n) / log n))`, clamped so every group keeps
    /// at least two rows.
    pub fn default_for(n: usize) -> Self {
        let raw = ((n as f64).sqrt() / (n as f64).ln()).round() as usize;
        let k = raw.max(1).min(n / 2).max(1);
        MomConfig { k }
    }
}

/// Group boundaries: the first `n mod k` groups take `ceil(n/k)` rows, the
/// rest `floor(n/k)`, all contiguous in the given row order. The paper's
/// partition scheme only requires data independence; contiguous blocks
/// keep the estimator reproducible.
fn group_ranges(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let extra = n % k;
    let mut ranges = Vec::with_capacity(k);
    let mut start = 0;
    for g in 0..k {
        let len = base + usize::from(g < extra);
        ranges.push((start, start + len));
        start += len;
    }
    ranges
}

/// Median-of-means covariance: entrywise median over the `k` group sample
/// covariances (each with the biased `1/|G|` normalization). `k = 1` is
/// exactly the sample covariance.
pub fn mom_covariance(x: &DataSample, cfg: &MomConfig) -> Result<SymMatrix> {
    let n = x.n();
    let k = cfg.k;
    if k == 0 || 2 * k > n {
        return Err(Error::InvalidParameter(format!(
            "median-of-means needs 1 <= k <= n/2 so every group has two rows (n = {n}, k = {k})"
        )));
    }
    if k == 1 {
        return Ok(sample_covariance(x));
    }

    let ranges = group_ranges(n, k);
    let group_covs: Vec<SymMatrix> = ranges
        .par_iter()
        .map(|&(a, b)| {
            let rows: Vec<usize> = (a..b).collect();
            let sub = x.select_rows(&rows).expect("group has >= 2 rows");
            group_covariance(&sub)
        })
        .collect();

    let d = x.dim();
    let mut out = Array2::zeros((d, d));
    let mut cell = vec![0.0f64; k];
    for i in 0..d {
        for j in i..d {
            for (g, cov) in group_covs.iter().enumerate() {
                cell[g] = cov.get(i, j);
            }
            let med = median_in_place(&mut cell);
            out[(i, j)] = med;
            out[(j, i)] = med;
        }
    }
    Ok(SymMatrix::from_symmetric_unchecked(out))
}

/// Per-group covariance in the biased `1/|G|` normalization,
/// `(1/|G|) sum (X_i - mean)(X_i - mean)^T`. This is the group statistic
/// the median runs over; only the `k = 1` case reduces to the
/// U-statistic-normalized `sample_covariance`.
fn group_covariance(g: &DataSample) -> SymMatrix {
    let n = g.n();
    let values = g.values();
    let mean = values.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = values - &mean.insert_axis(ndarray::Axis(0));
    let prod = centered.t().dot(&centered) / n as f64;
    SymMatrix::from_array(&prod).expect("finite covariance")
}

/// Median with the even-count convention: the mean of the two middle order
/// statistics.
fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MatrixNorm;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn k1_is_sample_covariance_exactly() {
        let x = DataSample::new(array![[1.0, 2.0], [0.0, -1.0], [3.0, 0.5], [-2.0, 1.0]]).unwrap();
        let mom = mom_covariance(&x, &MomConfig::new(1)).unwrap();
        let cov = sample_covariance(&x);
        assert_eq!(mom.as_array(), cov.as_array());
    }

    #[test]
    fn odd_k_median() {
        // Three groups of two rows, engineered so group variances of the
        // single coordinate are 1, 5 and 100.
        // Group sample variance for rows (a, b) is (a-b)^2/4.
        let x = DataSample::new(array![
            [0.0],
            [2.0], // (2)^2/4 = 1
            [0.0],
            [2.0 * 5.0f64.sqrt()], // 5
            [0.0],
            [20.0], // 100
        ])
        .unwrap();
        let mom = mom_covariance(&x, &MomConfig::new(3)).unwrap();
        assert_relative_eq!(mom.get(0, 0), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn even_k_median_averages_middle_pair() {
        // Four groups with variances 1, 2, 8, 9 -> median (2+8)/2 = 5.
        let vars = [1.0f64, 2.0, 8.0, 9.0];
        let mut rows = Vec::new();
        for v in vars {
            rows.push([0.0]);
            rows.push([2.0 * v.sqrt()]);
        }
        let data = Array2::from_shape_fn((8, 1), |(i, _)| rows[i][0]);
        let x = DataSample::new(data).unwrap();
        let mom = mom_covariance(&x, &MomConfig::new(4)).unwrap();
        assert_relative_eq!(mom.get(0, 0), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn group_sizes_differ_by_at_most_one() {
        for n in 4..40 {
            for k in 1..=(n / 2) {
                let ranges = group_ranges(n, k);
                assert_eq!(ranges.len(), k);
                assert_eq!(ranges.last().unwrap().1, n);
                let sizes: Vec<usize> = ranges.iter().map(|&(a, b)| b - a).collect();
                let lo = *sizes.iter().min().unwrap();
                let hi = *sizes.iter().max().unwrap();
                assert!(hi - lo <= 1, "n={n} k={k}: sizes {sizes:?}");
            }
        }
    }

    #[test]
    fn invariant_to_permutations_within_groups() {
        let x = DataSample::new(array![
            [1.0, 0.0],
            [2.0, 1.0],
            [0.5, -1.0],
            [3.0, 2.0],
            [-1.0, 0.25],
            [0.0, 1.5],
        ])
        .unwrap();
        let cfg = MomConfig::new(2); // groups {0,1,2}, {3,4,5}
        let base = mom_covariance(&x, &cfg).unwrap();

        // Permute rows inside each group.
        let xp = x.select_rows(&[2, 0, 1, 5, 3, 4]).unwrap();
        let perm = mom_covariance(&xp, &cfg).unwrap();
        let scale = 1.0 + base.norm(MatrixNorm::Max);
        for i in 0..2 {
            for j in 0..2 {
                assert!((base.get(i, j) - perm.get(i, j)).abs() <= 1e-12 * scale);
            }
        }

        // Swap the two group blocks (group labels permute).
        let xs = x.select_rows(&[3, 4, 5, 0, 1, 2]).unwrap();
        let swapped = mom_covariance(&xs, &cfg).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((base.get(i, j) - swapped.get(i, j)).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn k_too_large_errors() {
        let x = DataSample::new(array![[1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        assert!(mom_covariance(&x, &MomConfig::new(3)).is_err());
    }

    #[test]
    fn default_k_keeps_groups_viable() {
        for n in [2usize, 3, 5, 10, 50, 100, 400] {
            let cfg = MomConfig::default_for(n);
            assert!(cfg.k >= 1 && 2 * cfg.k <= n.max(2), "n={n} k={}", cfg.k);
        }
    }
}

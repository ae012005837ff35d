//! Observation panels and the pairwise-difference stream.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// An `n x d` panel of observations; each row is one i.i.d. draw.
#[derive(Debug, Clone)]
pub struct DataSample {
    values: Array2<f64>,
}

impl DataSample {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 {
            return Err(Error::InsufficientData { required: 2, actual: n });
        }
        if d == 0 {
            return Err(Error::InvalidParameter("data must have at least one variable".into()));
        }
        if let Some((idx, _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("observation {:?}", idx) });
        }
        Ok(DataSample { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// `m = floor(n/2)`, the effective sample size of the pairwise scheme.
    pub fn half_count(&self) -> usize {
        self.n() / 2
    }

    /// `N = n(n-1)/2`, the number of unordered observation pairs.
    pub fn pair_count(&self) -> usize {
        self.n() * (self.n() - 1) / 2
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Column `k` copied into a contiguous buffer; hot loops iterate these.
    pub fn column_vec(&self, k: usize) -> Vec<f64> {
        self.values.column(k).to_vec()
    }

    /// All columns as a `d x n` row-major matrix, so each variable is a
    /// contiguous slice. Costs one transposed copy of the panel.
    pub fn columns_major(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.dim(), self.n()));
        out.assign(&self.values.t());
        out
    }

    /// Restrict to the variable range `[start, start + width)`.
    pub fn slice_vars(&self, start: usize, width: usize) -> Result<DataSample> {
        if width == 0 || start + width > self.dim() {
            return Err(Error::InvalidParameter(format!(
                "variable slice [{start}, {}) out of range for d = {}",
                start + width,
                self.dim()
            )));
        }
        let values = self.values.slice(ndarray::s![.., start..start + width]).to_owned();
        DataSample::new(values)
    }

    /// Restrict to a subset of rows (observation indices).
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataSample> {
        let sub = self.values.select(ndarray::Axis(0), rows);
        DataSample::new(sub)
    }

    /// Stream of pairwise differences `Y = X_i - X_j`, each unordered pair
    /// visited exactly once.
    pub fn pairs(&self) -> PairStream<'_> {
        PairStream { data: self, i: 0, j: 1 }
    }

    /// Visit each unordered pair index `(i, j)` with `i < j`, in the fixed
    /// order `(0,1), (0,2), ..., (n-2, n-1)`.
    pub fn for_each_pair_index(&self, mut f: impl FnMut(usize, usize)) {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                f(i, j);
            }
        }
    }
}

/// Streaming iterator over pairwise differences. The `N x d` matrix of all
/// differences is never materialized; consumers fold pairs one at a time.
pub struct PairStream<'a> {
    data: &'a DataSample,
    i: usize,
    j: usize,
}

impl<'a> PairStream<'a> {
    pub fn pair_count(&self) -> usize {
        self.data.pair_count()
    }
}

impl<'a> Iterator for PairStream<'a> {
    type Item = Array1<f64>;

    fn next(&mut self) -> Option<Array1<f64>> {
        let n = self.data.n();
        if self.i >= n - 1 {
            return None;
        }
        let diff = &self.data.row(self.i) - &self.data.row(self.j);
        self.j += 1;
        if self.j >= n {
            self.i += 1;
            self.j = self.i + 1;
        }
        Some(diff)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.data.n();
        if self.i >= n - 1 {
            return (0, Some(0));
        }
        // Pairs remaining from (i, j) onward.
        let done = self.i * n - self.i * (self.i + 1) / 2 + (self.j - self.i - 1);
        let left = self.data.pair_count() - done;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pair_stream_visits_each_pair_once() {
        let x = DataSample::new(array![[1.0], [2.0], [4.0], [8.0]]).unwrap();
        let diffs: Vec<f64> = x.pairs().map(|y| y[0]).collect();
        assert_eq!(diffs.len(), x.pair_count());
        assert_eq!(diffs, vec![-1.0, -3.0, -7.0, -2.0, -6.0, -4.0]);
    }

    #[test]
    fn pair_stream_matches_sample_covariance() {
        let x = DataSample::new(array![
            [0.5, -1.0, 2.0],
            [1.5, 0.0, -0.5],
            [-0.25, 2.0, 1.0],
            [0.0, 0.5, -2.0],
            [2.0, -0.5, 0.25],
        ])
        .unwrap();
        let n_pairs = x.pair_count() as f64;
        let d = x.dim();
        let mut acc = ndarray::Array2::<f64>::zeros((d, d));
        for y in x.pairs() {
            for a in 0..d {
                for b in 0..d {
                    acc[(a, b)] += y[a] * y[b] / 2.0;
                }
            }
        }
        acc /= n_pairs;
        let cov = super::super::sample_covariance(&x);
        let max = cov.norm(crate::linalg::MatrixNorm::Max);
        for a in 0..d {
            for b in 0..d {
                assert!((acc[(a, b)] - cov.get(a, b)).abs() <= 1e-10 * (1.0 + max));
            }
        }
    }

    #[test]
    fn rejects_single_row_and_nan() {
        assert!(DataSample::new(array![[1.0, 2.0]]).is_err());
        assert!(DataSample::new(array![[1.0], [f64::NAN]]).is_err());
    }
}

//! Dense symmetric matrices, norms, eigendecomposition and the
//! pairwise-difference view of a data panel.
//!
//! Everything downstream (truncated estimators, M-estimators, tuning,
//! structured estimators) is built on the types here. All operations are
//! pure functions of immutable inputs.

mod data;
mod eigen;

pub use data::{DataSample, PairStream};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matrix norms used throughout the crate.
///
/// `Max` is the entrywise maximum absolute value, `Spectral` the largest
/// absolute eigenvalue, `Frobenius` the entrywise l2 norm and `OneOne` the
/// maximum absolute column sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    Max,
    Spectral,
    Frobenius,
    OneOne,
}

impl MatrixNorm {
    pub fn label(self) -> &'static str {
        match self {
            MatrixNorm::Max => "max",
            MatrixNorm::Spectral => "2",
            MatrixNorm::Frobenius => "F",
            MatrixNorm::OneOne => "1,1",
        }
    }
}

impl std::str::FromStr for MatrixNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(MatrixNorm::Max),
            "2" | "spectral" => Ok(MatrixNorm::Spectral),
            "F" | "f" | "fro" | "frobenius" => Ok(MatrixNorm::Frobenius),
            "1,1" | "one_one" => Ok(MatrixNorm::OneOne),
            other => Err(Error::InvalidParameter(format!(
                "unknown norm '{other}' (expected max, 2, F or one_one)"
            ))),
        }
    }
}

/// Dense symmetric `d x d` matrix with exact (bitwise) symmetry.
///
/// The upper triangle is canonical: constructors mirror it into the lower
/// triangle, and arithmetic built from symmetric inputs stays symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    /// Build from an arbitrary square matrix by symmetrizing via
    /// `(M + M^T)/2`, which kills round-off asymmetry in the input.
    pub fn from_array(m: &Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, actual: c });
        }
        if r == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        let mut entries = Array2::zeros((r, r));
        for i in 0..r {
            for j in i..r {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                if !v.is_finite() {
                    return Err(Error::NonFinite { context: format!("matrix entry ({i}, {j})") });
                }
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(SymMatrix { entries })
    }

    /// Build from a function on the upper triangle (`i <= j`); the lower
    /// triangle is mirrored exactly.
    pub fn from_upper_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Array2::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        SymMatrix { entries }
    }

    /// The square matrix already known to be symmetric to the bit; used by
    /// internal accumulators that fill both triangles identically.
    pub(crate) fn from_symmetric_unchecked(entries: Array2<f64>) -> Self {
        debug_assert!(entries.nrows() == entries.ncols());
        SymMatrix { entries }
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix { entries: Array2::zeros((d, d)) }
    }

    pub fn eye(d: usize) -> Self {
        SymMatrix { entries: Array2::eye(d) }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        SymMatrix::from_upper_fn(d, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_array(self) -> Array2<f64> {
        self.entries
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    /// Entrywise sum with another symmetric matrix.
    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { entries: &self.entries + &other.entries }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { entries: &self.entries - &other.entries }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { entries: &self.entries * s }
    }

    /// Matrix norm. `Spectral` performs a full eigendecomposition; the
    /// other norms are single passes over the entries.
    pub fn norm(&self, kind: MatrixNorm) -> f64 {
        match kind {
            MatrixNorm::Max => self.entries.iter().fold(0.0f64, |m, &x| m.max(x.abs())),
            MatrixNorm::Frobenius => self.entries.iter().map(|&x| x * x).sum::<f64>().sqrt(),
            MatrixNorm::OneOne => {
                let d = self.dim();
                (0..d)
                    .map(|j| (0..d).map(|i| self.entries[(i, j)].abs()).sum::<f64>())
                    .fold(0.0f64, f64::max)
            }
            MatrixNorm::Spectral => {
                let eig = self.eig().expect("spectral norm: eigendecomposition failed");
                eig.lambdas.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
            }
        }
    }

    /// Eigendecomposition with eigenvalues sorted in non-increasing order.
    /// Ties keep the sub-order produced by the QL sweep.
    pub fn eig(&self) -> Result<EigenSystem> {
        let d = self.dim();
        let flat = self.entries.as_slice().expect("SymMatrix storage is contiguous");
        let (lambdas, vectors) = eigen::symmetric_eigen_raw(flat, d)?;

        // Sort descending, stable in the original (ascending QL) order.
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| lambdas[b].partial_cmp(&lambdas[a]).unwrap());

        let mut sorted_lambdas = Vec::with_capacity(d);
        let mut sorted_vecs = Array2::zeros((d, d));
        for (col, &src) in order.iter().enumerate() {
            sorted_lambdas.push(lambdas[src]);
            for row in 0..d {
                sorted_vecs[(row, col)] = vectors[row * d + src];
            }
        }
        Ok(EigenSystem { lambdas: sorted_lambdas, vectors: sorted_vecs })
    }

    /// Matrix functional `f(A) = U f(Lambda) U^T`.
    pub fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
        let eig = self.eig()?;
        Ok(eig.reconstruct_with(|l| f(l)))
    }
}

/// Eigendecomposition of a symmetric matrix: eigenvalues non-increasing,
/// eigenvectors orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub lambdas: Vec<f64>,
    pub vectors: Array2<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// `V diag(g(lambda)) V^T`, exactly symmetric.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.dim();
        let mapped: Vec<f64> = self.lambdas.iter().map(|&l| g(l)).collect();
        // Scale columns by g(lambda), then multiply by V^T; fill the upper
        // triangle and mirror so symmetry is exact.
        let mut out = Array2::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.vectors[(i, k)] * mapped[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        SymMatrix::from_symmetric_unchecked(out)
    }

    /// The eigenvector for the `k`-th largest eigenvalue.
    pub fn vector(&self, k: usize) -> Array1<f64> {
        self.vectors.column(k).to_owned()
    }
}

/// Symmetric positive semidefinite square root via eigendecomposition.
/// Negative eigenvalues from round-off are clipped at zero.
pub fn sqrt_psd(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = m.eig()?;
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

/// Sample covariance in its pairwise-difference U-statistic normalization:
/// `(1/N) sum Y_i Y_i^T / 2 = (1/(n-1)) sum (X_i - mean)(X_i - mean)^T`.
///
/// This is the member every truncated/Huber family degenerates to as
/// `tau -> +inf`, which makes it the natural baseline; the centered form
/// is what is actually computed and the identity is covered by tests.
pub fn sample_covariance(x: &DataSample) -> SymMatrix {
    let n = x.n();
    let values = x.values();
    let mean = values.mean_axis(ndarray::Axis(0)).expect("n >= 2");
    let centered = values - &mean.insert_axis(ndarray::Axis(0));
    let prod = centered.t().dot(&centered) / (n - 1) as f64;
    SymMatrix::from_array(&prod).expect("finite covariance")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn norms_on_small_matrices() {
        let eye3 = SymMatrix::eye(3);
        assert_relative_eq!(eye3.norm(MatrixNorm::Spectral), 1.0, epsilon = 1e-12);

        let m = SymMatrix::from_diag(&[3.0, -4.0]);
        assert_relative_eq!(m.norm(MatrixNorm::Spectral), 4.0, epsilon = 1e-12);
        assert_relative_eq!(m.norm(MatrixNorm::Max), 4.0, epsilon = 1e-12);
        assert_relative_eq!(m.norm(MatrixNorm::Frobenius), 5.0, epsilon = 1e-12);
        assert_relative_eq!(m.norm(MatrixNorm::OneOne), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_diag_and_flip() {
        let m = SymMatrix::from_diag(&[2.0, 1.0]);
        let eig = m.eig().unwrap();
        assert_relative_eq!(eig.lambdas[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(eig.lambdas[1], 1.0, epsilon = 1e-14);

        let m = SymMatrix::from_array(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let eig = m.eig().unwrap();
        assert_relative_eq!(eig.lambdas[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(eig.lambdas[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn psd_from_factor_has_nonnegative_spectrum() {
        // A^T A is PSD by construction.
        let a = array![
            [0.3, -1.2, 0.7, 0.1, 0.9, -0.4],
            [1.1, 0.2, -0.8, 0.5, -0.3, 0.6],
            [-0.7, 0.4, 0.2, -1.0, 0.8, 0.3],
        ];
        let m = SymMatrix::from_array(&a.t().dot(&a)).unwrap();
        let eig = m.eig().unwrap();
        for &l in &eig.lambdas {
            assert!(l >= -1e-10, "PSD matrix produced eigenvalue {l}");
        }
    }

    #[test]
    fn matrix_fn_identity_and_square() {
        let m = SymMatrix::from_array(&array![[1.0, 0.3], [0.3, 2.0]]).unwrap();
        let same = m.matrix_fn(|x| x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(same.get(i, j), m.get(i, j), epsilon = 1e-12);
            }
        }

        let flip = SymMatrix::from_array(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let squared = flip.matrix_fn(|x| x * x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(squared.get(i, j), expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_symmetry_after_construction() {
        let m = SymMatrix::from_array(&array![[1.0, 2.0000001], [2.0, 5.0]]).unwrap();
        assert_eq!(m.get(0, 1).to_bits(), m.get(1, 0).to_bits());
    }

    #[test]
    fn sample_covariance_tiny_cases() {
        // Two identical rows: zero covariance.
        let x = DataSample::new(array![[1.0, -2.0], [1.0, -2.0]]).unwrap();
        let cov = sample_covariance(&x);
        assert_eq!(cov.norm(MatrixNorm::Max), 0.0);

        // n=2, d=1, values 0 and 2: the single pair Y = -2 gives
        // (1/N) Y^2/2 = 2.
        let x = DataSample::new(array![[0.0], [2.0]]).unwrap();
        let cov = sample_covariance(&x);
        assert_relative_eq!(cov.get(0, 0), 2.0, epsilon = 1e-14);
    }
}

//! Tail-robust covariance estimation for heavy-tailed data.
//!
//! The estimators here replace the sample covariance matrix when the data
//! only has a few finite moments: element-wise and spectrum-wise truncated
//! estimators, Huber-type M-estimators with data-driven tuning, and a
//! median-of-means estimator. On top of the generic estimators sit three
//! structured applications (bandable covariance, low-rank covariance,
//! sparse precision via the D-trace loss), a factor-model pipeline
//! (robust POET and approximate-FDP estimation), and a Monte Carlo
//! harness that benchmarks every method against the sample covariance.
//!
//! All estimators work on a [`DataSample`] (an `n x d` panel, one row per
//! observation) and return a [`SymMatrix`]. Robustification parameters can
//! be supplied directly, derived from population moment inputs, or tuned
//! from data (see [`tuning`]).

pub mod error;
pub mod factor;
pub mod huber;
pub(crate) mod kernels;
pub mod linalg;
pub mod mom;
pub mod sim;
pub mod structured;
pub mod truncated;
pub mod tuning;

pub use error::{Error, Result};
pub use linalg::{sample_covariance, DataSample, EigenSystem, MatrixNorm, PairStream, SymMatrix};
pub use truncated::{
    elementwise_truncated, psi, spectrum_truncated, theoretical_gamma, theoretical_spectral_tau,
    MomentConvention, SecondMomentMatrix, TruncationMatrix,
};

/// Test-only re-exports of internal kernels for the performance probes.
#[doc(hidden)]
pub mod bench_probe {
    pub use crate::kernels::capped_sum as capped_sum_probe;
    pub use crate::kernels::fill_pair_products as fill_pair_products_probe;
    pub use crate::kernels::fill_squares_with_stats as fill_squares_probe;
}

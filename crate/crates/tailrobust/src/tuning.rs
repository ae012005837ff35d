//! Data-driven calibration of the robustification parameters.
//!
//! The element-wise threshold solves the empirical truncated-second-moment
//! equation `(1/N) sum (Z_i^2 ^ tau^2) / tau^2 = (2 log d + t) / m` per
//! entry. The Huber variant solves the coupled system in `(theta, tau)`
//! where the residuals replace the raw products. The spectral threshold
//! solves a fixed-point equation on the operator norm of the clipped pair
//! Gram matrix. Cross-validation handles the estimators the equations do
//! not cover.
//!
//! Everywhere the confidence parameter defaults to `t = log n`, i.e.
//! `delta = 1/n`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::huber::elementwise_huber;
use crate::kernels;
use crate::linalg::{sample_covariance, DataSample, MatrixNorm, SymMatrix};
use crate::truncated::{self, spectrum_truncated, TruncationMatrix};

/// Default confidence parameter `t = log n` (equivalently `delta = 1/n`).
pub fn default_t(n: usize) -> f64 {
    (n as f64).ln()
}

/// Outcome of a scalar tuning solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneResult {
    /// Solved threshold.
    pub tau: f64,
    /// Location estimate, present for the coupled Huber system.
    pub theta: Option<f64>,
    /// Iterations consumed.
    pub iterations: usize,
    /// Whether the stopping rule was met before the iteration cap.
    pub converged: bool,
}

/// Which sample count divides `2 log d + t` in the tuning equation.
///
/// The truncated-moment equation divides by `m = floor(n/2)`; the coupled
/// Huber system as written divides by `n`. Both are implemented verbatim
/// and the choice is surfaced here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TuningDenominator {
    /// Divide by `n`.
    FullSample,
    /// Divide by `m = floor(n/2)`.
    HalfSample,
}

/// Settings for the coupled `(theta, tau)` solve.
#[derive(Debug, Clone)]
pub struct HuberSystemConfig {
    /// Cap on alternation rounds.
    pub max_rounds: usize,
    /// Denominator convention in the `f1` equation.
    pub denominator: TuningDenominator,
}

impl Default for HuberSystemConfig {
    fn default() -> Self {
        HuberSystemConfig { max_rounds: 100, denominator: TuningDenominator::FullSample }
    }
}

/// What happened at one matrix entry during adaptive estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Tuning equation had no solution; the entry used `tau = +inf`.
    InfiniteTau,
    /// Huber system failed; the entry fell back to the adaptive truncated
    /// estimate.
    AdaptiveTruncated,
    /// Both tuning routes failed; the entry is the plain pair-product mean.
    SampleEntry,
}

/// Per-entry diagnostic, recorded only for entries that needed a fallback
/// or failed to converge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryDiagnostic {
    pub row: usize,
    pub col: usize,
    pub converged: bool,
    pub iterations: usize,
    pub fallback: Option<Fallback>,
}

/// Machine-readable tuning report for an adaptive estimate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TuningDiagnostics {
    /// Total entries tuned (upper triangle).
    pub entries_total: usize,
    /// Entries that fell back.
    pub fallback_count: usize,
    /// Entries whose solver hit the iteration cap.
    pub non_converged_count: usize,
    /// The exceptional entries.
    pub entries: Vec<EntryDiagnostic>,
}

/// An adaptive estimate together with its tuning report.
#[derive(Debug, Clone)]
pub struct AdaptiveEstimate {
    pub sigma: SymMatrix,
    pub diagnostics: TuningDiagnostics,
}

/// Left-hand side of the truncated-moment equation,
/// `(1/N) sum min(z_i^2, tau^2) / tau^2`. Non-increasing in `tau`.
pub fn truncation_equation_lhs(z: &[f64], tau: f64) -> f64 {
    let s = tau * tau;
    let total = kernels::capped_residual_sq_sum(z, 0.0, s);
    total / (z.len() as f64 * s)
}

/// `f2` of the coupled system: the Huber score `sum psi_tau(z_i - theta)`.
pub fn huber_system_f2(z: &[f64], theta: f64, tau: f64) -> f64 {
    kernels::huber_score(z, theta, tau).0
}

/// Solve `sum_i min(a_i, s) = K s` for `s > 0`, given nonnegative `a_i`
/// (handed to `eval` lazily) and `K > 0`. The left side minus the right is
/// concave piecewise linear with a unique positive root when
/// `K < #{a_i > 0}`. Secant steps seeded from the right of the root stay
/// right of it by concavity and land exactly once both points share the
/// root's segment; a bisection safeguard covers stalls. `eval(s)` returns
/// `sum_i min(a_i, s)`, a single vectorizable sweep.
fn solve_capped_sum_equation(
    total: f64,
    max_a: f64,
    count_pos: usize,
    k: f64,
    eval: impl Fn(f64) -> f64,
) -> Result<(f64, usize)> {
    if count_pos == 0 {
        return Err(Error::NoSolution("all values are zero".into()));
    }
    if k >= count_pos as f64 {
        return Err(Error::NoSolution(format!(
            "target mass {k:.6} is not below the nonzero count {count_pos}"
        )));
    }
    // Root beyond the largest value: closed form.
    if total - k * max_a >= 0.0 {
        return Ok((total / k, 0));
    }

    // phi(s) = eval(s) - k s. Both seeds sit right of the root:
    // phi(max_a) = total - k max_a < 0 (checked above) and
    // phi(total/k) = eval(total/k) - total <= 0.
    let mut s_prev = max_a;
    let mut phi_prev = total - k * max_a;
    let mut s = total / k;
    let mut lo = 0.0f64;
    let mut hi = s;
    const CAP: usize = 200;
    for iter in 1..=CAP {
        let phi = eval(s) - k * s;
        if phi.abs() <= 1e-12 * k * s {
            return Ok((s, iter));
        }
        if phi < 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let denom = phi - phi_prev;
        let secant =
            if denom != 0.0 { s - phi * (s - s_prev) / denom } else { f64::NAN };
        s_prev = s;
        phi_prev = phi;
        s = if secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            return Ok((s, iter));
        }
    }
    Err(Error::NoConvergence {
        what: "truncated-moment equation",
        iterations: CAP,
        residual: hi - lo,
    })
}

/// Solve the empirical truncated-second-moment equation
/// `(1/N) sum (z_i^2 ^ tau^2) / tau^2 = (2 log d + t) / m` for `tau`.
///
/// A unique solution exists iff `2 log d + t < (m/N) #{z_i != 0}`; the
/// violation is reported as `NoSolution` naming the deficit.
pub fn solve_truncation_tau(z: &[f64], d: usize, t: f64, m: usize) -> Result<TuneResult> {
    let mut squares = Vec::new();
    let stats = kernels::fill_squares_with_stats(z, &mut squares);
    solve_truncation_tau_core(&squares, stats, d, t, m)
}

/// Same equation with the squared values and their `(sum, max, nonzero)`
/// stats precomputed; the per-entry hot loop reuses scratch buffers so
/// every solver step is a single min-sum sweep.
pub(crate) fn solve_truncation_tau_core(
    a: &[f64],
    (total, max_a, count_pos): (f64, f64, usize),
    d: usize,
    t: f64,
    m: usize,
) -> Result<TuneResult> {
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let n_terms = a.len() as f64;
    let target = 2.0 * (d as f64).ln() + t;
    let rhs = target / m as f64;
    let k = rhs * n_terms;

    let available = (m as f64 / n_terms) * count_pos as f64;
    if target >= available {
        return Err(Error::NoSolution(format!(
            "2 log d + t = {target:.6} must be below (m/N) * nonzero count = {available:.6}"
        )));
    }

    let (s, iterations) =
        solve_capped_sum_equation(total, max_a, count_pos, k, |s| kernels::capped_sum(a, s))?;
    Ok(TuneResult { tau: s.sqrt(), theta: None, iterations, converged: true })
}

/// Element-wise truncated estimator with per-entry adaptive thresholds.
///
/// Entries whose tuning equation has no solution (constant columns, heavy
/// ties) fall back to `tau = +inf`, i.e. the plain pair-product mean, and
/// are recorded in the diagnostics.
pub fn adaptive_elementwise_truncated(x: &DataSample, t: f64) -> Result<AdaptiveEstimate> {
    let d = x.dim();
    let m = x.half_count();
    let n_pairs = x.pair_count() as f64;
    let cols = x.columns_major();
    let entries = truncated::upper_triangle_indices(d);

    struct EntryOut {
        value: f64,
        diag: Option<EntryDiagnostic>,
    }

    let results: Vec<EntryOut> = entries
        .par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(buf, squares), &(row, col)| {
                let stats = kernels::fill_pair_products_and_squares(
                    cols.row(row).as_slice().unwrap(),
                    cols.row(col).as_slice().unwrap(),
                    buf,
                    squares,
                );
                match solve_truncation_tau_core(squares, stats, d, t, m) {
                    Ok(res) => EntryOut {
                        value: kernels::clamped_sum(buf, res.tau) / n_pairs,
                        diag: None,
                    },
                    Err(_) => EntryOut {
                        value: kernels::sum(buf) / n_pairs,
                        diag: Some(EntryDiagnostic {
                            row,
                            col,
                            converged: true,
                            iterations: 0,
                            fallback: Some(Fallback::InfiniteTau),
                        }),
                    },
                }
            },
        )
        .collect();

    let mut out = Array2::zeros((d, d));
    let mut diagnostics = TuningDiagnostics { entries_total: entries.len(), ..Default::default() };
    for (&(row, col), r) in entries.iter().zip(&results) {
        out[(row, col)] = r.value;
        out[(col, row)] = r.value;
        if let Some(diag) = &r.diag {
            diagnostics.fallback_count += 1;
            diagnostics.entries.push(diag.clone());
        }
    }
    Ok(AdaptiveEstimate {
        sigma: SymMatrix::from_symmetric_unchecked(out),
        diagnostics,
    })
}

/// Solve the coupled system
/// `f1(theta, tau) = (1/N) sum ((z_i - theta)^2 ^ tau^2)/tau^2 - (2 log d + t)/n = 0`,
/// `f2(theta, tau) = sum psi_tau(z_i - theta) = 0`
/// by alternation from `theta_0 = mean(z)`, stopping when the `theta`
/// update falls below `1e-8 (1 + |theta_0|)` and both residuals meet their
/// bounds (`|f1| <= 1e-8`, `|f2| <= 1e-8 N tau`).
pub fn solve_huber_system(
    z: &[f64],
    d: usize,
    t: f64,
    n: usize,
    cfg: &HuberSystemConfig,
) -> Result<TuneResult> {
    if z.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    let n_terms = z.len() as f64;
    let denom = match cfg.denominator {
        TuningDenominator::FullSample => n as f64,
        TuningDenominator::HalfSample => (n / 2) as f64,
    };
    if denom < 1.0 {
        return Err(Error::InvalidParameter("sample count too small".into()));
    }
    let target = 2.0 * (d as f64).ln() + t;
    let rhs = target / denom;
    let k = rhs * n_terms;

    let mut theta = kernels::sum(z) / n_terms;
    let eps = 1e-8 * (1.0 + theta.abs());

    let mut tau = f64::NAN;
    let mut rounds = 0;
    let mut converged = false;
    while rounds < cfg.max_rounds {
        rounds += 1;

        // f1 step: residual moment equation at the current theta.
        let (total, max_a, count_pos) = kernels::residual_sq_stats(z, theta);
        let available = (denom / n_terms) * count_pos as f64;
        if target >= available {
            return Err(Error::NoSolution(format!(
                "2 log d + t = {target:.6} must be below (n/N) * #(z != theta) = {available:.6}"
            )));
        }
        let (s, _) = solve_capped_sum_equation(total, max_a, count_pos, k, |s| {
            kernels::capped_residual_sq_sum(z, theta, s)
        })?;
        tau = s.sqrt();

        // f2 step: Huber score root at the new tau.
        let next = solve_huber_score_root(z, tau, theta);

        let moved = (next - theta).abs();
        theta = next;
        if moved < eps {
            // Residual check; another round tightens f1 if the last theta
            // move shifted it.
            let f1 =
                kernels::capped_residual_sq_sum(z, theta, tau * tau) / (n_terms * tau * tau) - rhs;
            let f2 = kernels::huber_score(z, theta, tau).0;
            if f1.abs() <= 1e-8 && f2.abs() <= 1e-8 * n_terms * tau {
                converged = true;
                break;
            }
        }
    }
    Ok(TuneResult { tau, theta: Some(theta), iterations: rounds, converged })
}

/// Root of the monotone score `sum psi_tau(z_i - theta)` in `theta`,
/// bisection-safeguarded Newton started from `init`.
fn solve_huber_score_root(z: &[f64], tau: f64, init: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in z {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return lo;
    }
    let tol = 1e-12 * z.len() as f64 * tau;
    let mut theta = init.clamp(lo, hi);
    for _ in 0..100 {
        let (score, unclipped) = kernels::huber_score(z, theta, tau);
        if score.abs() <= tol {
            return theta;
        }
        if score > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = if unclipped > 0 { theta + score / unclipped as f64 } else { f64::NAN };
        theta = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (1.0 + theta.abs()) {
            return theta;
        }
    }
    theta
}

/// Data-adaptive Huber covariance: every entry solves the coupled
/// `(theta, tau)` system on its pair products; the matrix is mirrored from
/// the upper triangle. Entries that fail fall back to the adaptive
/// truncated estimate, then to the plain pair-product mean, with each
/// fallback logged.
pub fn adaptive_huber_covariance(
    x: &DataSample,
    t: f64,
    cfg: &HuberSystemConfig,
) -> Result<AdaptiveEstimate> {
    let d = x.dim();
    let n = x.n();
    let m = x.half_count();
    let n_pairs = x.pair_count() as f64;
    let cols = x.columns_major();
    let entries = truncated::upper_triangle_indices(d);

    struct EntryOut {
        value: f64,
        diag: Option<EntryDiagnostic>,
    }

    let results: Vec<EntryOut> = entries
        .par_iter()
        .map_init(Vec::new, |buf, &(row, col)| {
            kernels::fill_pair_products(
                cols.row(row).as_slice().unwrap(),
                cols.row(col).as_slice().unwrap(),
                buf,
            );
            match solve_huber_system(buf, d, t, n, cfg) {
                Ok(res) if res.converged => EntryOut {
                    value: res.theta.expect("system solve carries theta"),
                    diag: None,
                },
                Ok(res) => EntryOut {
                    value: res.theta.expect("system solve carries theta"),
                    diag: Some(EntryDiagnostic {
                        row,
                        col,
                        converged: false,
                        iterations: res.iterations,
                        fallback: None,
                    }),
                },
                Err(_) => match solve_truncation_tau(buf, d, t, m) {
                    Ok(res) => EntryOut {
                        value: kernels::clamped_sum(buf, res.tau) / n_pairs,
                        diag: Some(EntryDiagnostic {
                            row,
                            col,
                            converged: true,
                            iterations: res.iterations,
                            fallback: Some(Fallback::AdaptiveTruncated),
                        }),
                    },
                    Err(_) => EntryOut {
                        value: kernels::sum(buf) / n_pairs,
                        diag: Some(EntryDiagnostic {
                            row,
                            col,
                            converged: true,
                            iterations: 0,
                            fallback: Some(Fallback::SampleEntry),
                        }),
                    },
                },
            }
        })
        .collect();

    let mut out = Array2::zeros((d, d));
    let mut diagnostics = TuningDiagnostics { entries_total: entries.len(), ..Default::default() };
    for (&(row, col), r) in entries.iter().zip(&results) {
        out[(row, col)] = r.value;
        out[(col, row)] = r.value;
        if let Some(diag) = &r.diag {
            if diag.fallback.is_some() {
                diagnostics.fallback_count += 1;
            }
            if !diag.converged {
                diagnostics.non_converged_count += 1;
            }
            diagnostics.entries.push(diag.clone());
        }
    }
    Ok(AdaptiveEstimate {
        sigma: SymMatrix::from_symmetric_unchecked(out),
        diagnostics,
    })
}

/// Solve the spectral tuning equation
/// `|(1/(tau^2 N)) sum (|Y_i|^2/2 ^ tau)^2 Y_i Y_i^T / |Y_i|^2|_2 = (log(2d) + t)/m`
/// by fixed-point iteration on `tau^2`, to relative change `1e-4`.
///
/// The map is monotone so the iteration cannot oscillate in exact
/// arithmetic; if 50 iterations pass without meeting the tolerance the
/// iterate with the best residual is returned with `converged = false`.
pub fn solve_spectral_tau(x: &DataSample, t: f64) -> Result<TuneResult> {
    let d = x.dim();
    let m = x.half_count() as f64;
    let rhs = ((2.0 * d as f64).ln() + t) / m;

    let ws = SpectralWorkspace::new(x)?;
    let n_terms = ws.b.len() as f64;

    // Scalar surrogate for the starting point: the same equation with the
    // matrix norm replaced by the scalar average. Its solvability is
    // necessary for the matrix equation.
    let mut bsq = Vec::new();
    let (total, max_a, count_pos) = kernels::fill_squares_with_stats(&ws.b, &mut bsq);
    if count_pos == 0 {
        return Err(Error::NoSolution("all pairwise differences are zero".into()));
    }
    let k = rhs * n_terms;
    let (s0, _) = solve_capped_sum_equation(total, max_a, count_pos, k, |s| {
        kernels::capped_sum(&bsq, s)
    })
    .map_err(|_| {
        Error::NoSolution(format!(
            "(log(2d) + t)/m = {rhs:.6} is not below the nonzero pair fraction {:.6}",
            count_pos as f64 / n_terms
        ))
    })?;

    // Fixed point of g(s) = rho(sqrt(s))/rhs on s = tau^2. The plain
    // Picard map contracts slowly when most pairs are clipped, so a
    // secant step on h(s) = g(s) - s accelerates it; h is monotone
    // increasing-minus-identity with a unique root when one exists.
    let mut s_cur = s0;
    let mut weights = vec![0.0f64; ws.b.len()];
    let mut best = (f64::INFINITY, s0.sqrt(), false);
    let mut iterations = 0;
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..50 {
        iterations += 1;
        let tau = s_cur.sqrt();
        for (w, &bi) in weights.iter_mut().zip(&ws.b) {
            *w = if bi > 0.0 {
                let c = if bi < tau { bi } else { tau };
                c * c / (2.0 * bi)
            } else {
                0.0
            };
        }
        let rho = ws.lambda_max(&weights)? / n_terms;
        if rho <= 0.0 {
            return Err(Error::NoSolution("clipped pair Gram matrix is zero".into()));
        }
        let g = rho / rhs;
        let residual = (rho / s_cur - rhs).abs() / rhs;
        if residual < best.0 {
            best = (residual, tau, true);
        }
        if ((g / s_cur).sqrt() - 1.0).abs() < 1e-4 {
            // tau_new/tau within tolerance: report the Picard update.
            return Ok(TuneResult {
                tau: g.sqrt(),
                theta: None,
                iterations,
                converged: true,
            });
        }
        let h = g - s_cur;
        let next = match prev {
            Some((s_p, h_p)) if (h - h_p).abs() > 0.0 => {
                let secant = s_cur - h * (s_cur - s_p) / (h - h_p);
                if secant.is_finite() && secant > 0.0 {
                    secant
                } else {
                    g
                }
            }
            _ => g,
        };
        prev = Some((s_cur, h));
        s_cur = next;
    }
    Ok(TuneResult { tau: best.1, theta: None, iterations, converged: false })
}

/// `|Y_i|^2 / 2` for every pair, in canonical order.
fn pair_half_norms(x: &DataSample) -> Vec<f64> {
    let n = x.n();
    let d = x.dim();
    let values = x.values();
    let flat = values.as_slice().expect("row-major panel");
    let mut out = Vec::with_capacity(x.pair_count());
    for i in 0..n {
        let xi = &flat[i * d..(i + 1) * d];
        for j in (i + 1)..n {
            let xj = &flat[j * d..(j + 1) * d];
            let mut acc = 0.0;
            for c in 0..d {
                let diff = xi[c] - xj[c];
                acc += diff * diff;
            }
            out.push(0.5 * acc);
        }
    }
    out
}

/// Exact top eigenvalue of weighted pair Gram matrices
/// `M(w) = sum_{i<j} w_ij (x_i - x_j)(x_i - x_j)^T`.
///
/// Every pair difference lives in the row space of the panel, so
/// `M(w) = X^T L X` with `L` the `n x n` weighted Laplacian of the
/// complete pair graph. The nonzero spectrum of `X^T L X` equals that of
/// `G^(1/2) L G^(1/2)` with the Gram matrix `G = X X^T`, which turns each
/// norm evaluation into two `n x n` products and one `n x n`
/// eigendecomposition (or the direct `d x d` route when `d < n`).
struct SpectralWorkspace<'a> {
    x: &'a DataSample,
    /// `|Y_p|^2 / 2` per pair in canonical order.
    b: Vec<f64>,
    /// `G^(1/2)` for the Gram route (`n <= d`), `None` for the direct
    /// route.
    g_half: Option<Array2<f64>>,
}

impl<'a> SpectralWorkspace<'a> {
    fn new(x: &'a DataSample) -> Result<Self> {
        let b = pair_half_norms(x);
        let g_half = if x.n() <= x.dim() {
            let g = x.values().dot(&x.values().t());
            let g = SymMatrix::from_array(&g)?;
            let eig = g.eig()?;
            Some(eig.reconstruct_with(|l| l.max(0.0).sqrt()).into_array())
        } else {
            None
        };
        Ok(SpectralWorkspace { x, b, g_half })
    }

    /// Weighted complete-graph Laplacian `L(w)`.
    fn laplacian(&self, weights: &[f64]) -> Array2<f64> {
        let n = self.x.n();
        let mut lap = Array2::zeros((n, n));
        let mut p = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let w = weights[p];
                p += 1;
                if w == 0.0 {
                    continue;
                }
                lap[(i, j)] -= w;
                lap[(j, i)] -= w;
                lap[(i, i)] += w;
                lap[(j, j)] += w;
            }
        }
        lap
    }

    /// `lambda_max(sum w_ij Y_ij Y_ij^T)`, exact via eigendecomposition.
    fn lambda_max(&self, weights: &[f64]) -> Result<f64> {
        let lap = self.laplacian(weights);
        let projected = match &self.g_half {
            Some(g_half) => {
                let tmp = g_half.dot(&lap);
                SymMatrix::from_array(&tmp.dot(g_half))?
            }
            None => {
                let lx = lap.dot(self.x.values());
                SymMatrix::from_array(&self.x.values().t().dot(&lx))?
            }
        };
        let eig = projected.eig()?;
        Ok(eig.lambdas[0].max(0.0))
    }
}

/// Estimator families whose scalar threshold is selected by
/// cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvEstimator {
    SpectrumTruncated,
    ElementwiseHuberScalar,
}

/// Cross-validation grid: strictly increasing candidates and a fold count.
#[derive(Debug, Clone)]
pub struct CvGrid {
    pub candidates: Vec<f64>,
    pub folds: usize,
}

impl CvGrid {
    pub fn new(candidates: Vec<f64>, folds: usize) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidParameter("cross-validation grid is empty".into()));
        }
        if candidates.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "cross-validation candidates must be strictly increasing".into(),
            ));
        }
        if candidates.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "cross-validation candidates must be positive and finite".into(),
            ));
        }
        if folds < 2 {
            return Err(Error::InvalidParameter("cross-validation needs at least 2 folds".into()));
        }
        Ok(CvGrid { candidates, folds })
    }

    /// `count` log-spaced candidates on `[lo_factor, hi_factor] * scale`.
    pub fn log_spaced(scale: f64, lo_factor: f64, hi_factor: f64, count: usize, folds: usize) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("grid scale must be positive, got {scale}")));
        }
        let (llo, lhi) = ((scale * lo_factor).ln(), (scale * hi_factor).ln());
        let candidates = (0..count)
            .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1).max(1) as f64).exp())
            .collect();
        CvGrid::new(candidates, folds)
    }

    /// Default five-fold grid: 20 log-spaced candidates spanning
    /// `[0.1, 10]` times the theoretical scale with the plug-in empirical
    /// second moment.
    pub fn default_for(x: &DataSample, estimator: CvEstimator) -> Result<Self> {
        let scale = plugin_tau_scale(x, estimator);
        CvGrid::log_spaced(scale, 0.1, 10.0, 20, 5)
    }
}

/// Theoretical threshold scale with plug-in moments: for the spectral
/// family `sqrt(rho_inf) * sqrt(m / (log 2d + t))` with `rho_inf` the top
/// eigenvalue of the mean squared pair matrix; for the element-wise family
/// the root-mean-square of the per-entry second moments in place of the
/// operator norm.
pub fn plugin_tau_scale(x: &DataSample, estimator: CvEstimator) -> f64 {
    let d = x.dim();
    let m = x.half_count() as f64;
    let t = default_t(x.n());
    match estimator {
        CvEstimator::SpectrumTruncated => {
            let rho = SpectralWorkspace::new(x)
                .and_then(|ws| {
                    let weights: Vec<f64> =
                        ws.b.iter().map(|&bi| if bi > 0.0 { bi / 2.0 } else { 0.0 }).collect();
                    Ok(ws.lambda_max(&weights)? / ws.b.len() as f64)
                })
                .unwrap_or(f64::MIN_POSITIVE);
            (rho.max(f64::MIN_POSITIVE)).sqrt() * (m / ((2.0 * d as f64).ln() + t)).sqrt()
        }
        CvEstimator::ElementwiseHuberScalar => {
            let cols = x.columns_major();
            let entries = truncated::upper_triangle_indices(d);
            let mean_sq: f64 = entries
                .par_iter()
                .map_init(Vec::new, |buf, &(k, l)| {
                    kernels::fill_pair_products(
                        cols.row(k).as_slice().unwrap(),
                        cols.row(l).as_slice().unwrap(),
                        buf,
                    );
                    buf.iter().map(|&z| z * z).sum::<f64>() / buf.len() as f64
                })
                .sum::<f64>()
                / entries.len() as f64;
            mean_sq.max(f64::MIN_POSITIVE).sqrt() * (m / (2.0 * (d as f64).ln() + t)).sqrt()
        }
    }
}

/// Select the threshold by k-fold cross-validation: the candidate
/// minimizing the mean Frobenius distance between the training estimate
/// and the validation-fold sample covariance. Ties pick the smallest
/// candidate. Fold assignment is a seeded shuffle, so the selection is
/// deterministic given the seed.
pub fn cross_validate_tau(
    x: &DataSample,
    estimator: CvEstimator,
    grid: &CvGrid,
    seed: u64,
) -> Result<f64> {
    let n = x.n();
    if grid.folds > n / 2 {
        return Err(Error::InvalidParameter(format!(
            "{} folds leave validation folds with fewer than 2 rows (n = {n})",
            grid.folds
        )));
    }
    if grid.candidates.len() == 1 {
        return Ok(grid.candidates[0]);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    // Round-robin over the shuffled order keeps fold sizes within one.
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); grid.folds];
    for (pos, &idx) in order.iter().enumerate() {
        folds[pos % grid.folds].push(idx);
    }

    let mut losses = vec![0.0f64; grid.candidates.len()];
    for fold in &folds {
        let mut train_rows: Vec<usize> = Vec::with_capacity(n - fold.len());
        let in_fold: std::collections::HashSet<usize> = fold.iter().copied().collect();
        for i in 0..n {
            if !in_fold.contains(&i) {
                train_rows.push(i);
            }
        }
        let train = x.select_rows(&train_rows)?;
        let val = x.select_rows(fold)?;
        let target = sample_covariance(&val);

        match estimator {
            CvEstimator::SpectrumTruncated => {
                for (ci, &tau) in grid.candidates.iter().enumerate() {
                    let est = spectrum_truncated(&train, tau)?;
                    losses[ci] += est.sub(&target).norm(MatrixNorm::Frobenius);
                }
            }
            CvEstimator::ElementwiseHuberScalar => {
                let ests = elementwise_huber_grid(&train, &grid.candidates)?;
                for (ci, est) in ests.iter().enumerate() {
                    losses[ci] += est.sub(&target).norm(MatrixNorm::Frobenius);
                }
            }
        }
    }

    let mut best = 0;
    for ci in 1..losses.len() {
        if losses[ci] < losses[best] {
            best = ci;
        }
    }
    Ok(grid.candidates[best])
}

/// Element-wise Huber estimates for every candidate threshold at once:
/// per entry, the pair products are materialized a single time and the
/// score solves walk the ascending grid with warm-started locations.
fn elementwise_huber_grid(x: &DataSample, taus: &[f64]) -> Result<Vec<SymMatrix>> {
    let d = x.dim();
    let cols = x.columns_major();
    let entries = truncated::upper_triangle_indices(d);
    let per_entry: Vec<Vec<f64>> = entries
        .par_iter()
        .map_init(Vec::new, |buf, &(k, l)| {
            kernels::fill_pair_products(
                cols.row(k).as_slice().unwrap(),
                cols.row(l).as_slice().unwrap(),
                buf,
            );
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in buf.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let mut theta = 0.5 * (lo + hi);
            taus.iter()
                .map(|&tau| {
                    theta = solve_huber_score_root(buf, tau, theta);
                    theta
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(taus.len());
    for (ci, _) in taus.iter().enumerate() {
        let mut mat = Array2::zeros((d, d));
        for (&(k, l), vals) in entries.iter().zip(&per_entry) {
            mat[(k, l)] = vals[ci];
            mat[(l, k)] = vals[ci];
        }
        out.push(SymMatrix::from_symmetric_unchecked(mat));
    }
    Ok(out)
}

/// Scalar-threshold convenience wrappers used by the benchmark harness.
pub fn cv_spectrum_truncated(x: &DataSample, seed: u64) -> Result<SymMatrix> {
    let grid = CvGrid::default_for(x, CvEstimator::SpectrumTruncated)?;
    let tau = cross_validate_tau(x, CvEstimator::SpectrumTruncated, &grid, seed)?;
    spectrum_truncated(x, tau)
}

pub fn cv_elementwise_huber(x: &DataSample, seed: u64) -> Result<SymMatrix> {
    let grid = CvGrid::default_for(x, CvEstimator::ElementwiseHuberScalar)?;
    let tau = cross_validate_tau(x, CvEstimator::ElementwiseHuberScalar, &grid, seed)?;
    let gamma = TruncationMatrix::uniform(x.dim(), tau)?;
    elementwise_huber(x, &gamma)
}

/// Spectrum-wise truncated estimator with the adaptively solved threshold.
///
/// The spectral equation only has a solution in the tall-data regime
/// (roughly `m` above `min(n, d) log(2dn)`); a non-converged solve is
/// reported as `NoSolution` rather than silently truncating at a
/// meaningless threshold.
pub fn adaptive_spectrum_truncated(x: &DataSample, t: f64) -> Result<SymMatrix> {
    let tuned = solve_spectral_tau(x, t)?;
    if !tuned.converged {
        return Err(Error::NoSolution(format!(
            "spectral tuning equation did not converge (best tau {:.3e});              the equation needs m well above min(n, d) log(2dn)",
            tuned.tau
        )));
    }
    spectrum_truncated(x, tuned.tau)
}

/// Robust mean of a univariate sample: Huber location at
/// `tau = scale * sqrt(n / log(n d))`, the calibration used by the
/// factor-model test statistics.
pub fn robust_mean_tau(scale: f64, n: usize, d: usize) -> f64 {
    scale * (n as f64 / ((n as f64) * (d as f64)).ln()).sqrt()
}

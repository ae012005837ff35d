//! Sparse precision matrix estimation with the D-trace loss.
//!
//! Solves `argmin (1/2)<Theta^2, Sigma> - tr(Theta) + lambda sum_{k!=l} |Theta_kl|`
//! by proximal gradient with a fixed step. The quadratic loss keeps the
//! iterates symmetric without a symmetry constraint; the penalty excludes
//! the diagonal. The program is convex only for a PSD pilot, so pilots
//! with eigenvalues below a small floor get their spectrum clipped first.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{MatrixNorm, SymMatrix};

/// Spectrum floor that guarantees a convex program.
const SPECTRUM_FLOOR: f64 = 1e-8;

/// Penalty and solver settings for the D-trace program.
#[derive(Debug, Clone, Copy)]
pub struct DtraceConfig {
    /// Off-diagonal l1 penalty, `lambda >= 0`.
    pub lambda: f64,
    /// Proximal gradient step; `None` selects `1 / lambda_max(pilot)`.
    /// Steps at or above `2 / lambda_max(pilot)` are rejected.
    pub step: Option<f64>,
    /// Iteration cap.
    pub max_iter: usize,
    /// Relative tolerance on the iterate change.
    pub tol: f64,
}

impl DtraceConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(DtraceConfig { lambda, step: None, max_iter: 5000, tol: 1e-6 })
    }

    /// Penalty from the theoretical shape
    /// `lambda = 4 C v_max sqrt((2 log d + log(1/delta)) / floor(n/2))`,
    /// with `v_max` a plug-in scale and `C` a user constant.
    pub fn theoretical_lambda(c: f64, v_max: f64, n: usize, d: usize, delta: f64) -> f64 {
        let m = (n / 2) as f64;
        4.0 * c * v_max * ((2.0 * (d as f64).ln() + (1.0 / delta).ln()) / m).sqrt()
    }
}

/// Solver outcome details alongside the estimate.
#[derive(Debug, Clone)]
pub struct DtraceReport {
    /// Whether the pilot's spectrum was clipped at the convexity floor.
    pub spectrum_clipped: bool,
    /// Proximal gradient iterations used.
    pub iterations: usize,
    /// Final entrywise KKT residual.
    pub kkt_residual: f64,
}

/// D-trace precision estimate from a symmetric pilot covariance.
pub fn dtrace_precision(pilot: &SymMatrix, cfg: &DtraceConfig) -> Result<SymMatrix> {
    dtrace_precision_with_report(pilot, cfg).map(|(theta, _)| theta)
}

/// Same, returning solver diagnostics.
pub fn dtrace_precision_with_report(
    pilot: &SymMatrix,
    cfg: &DtraceConfig,
) -> Result<(SymMatrix, DtraceReport)> {
    if !(cfg.lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {}",
            cfg.lambda
        )));
    }
    let d = pilot.dim();
    let eig = pilot.eig()?;
    let lam_max = eig.lambdas[0];
    let lam_min = *eig.lambdas.last().expect("d >= 1");
    if !(lam_max > 0.0) {
        return Err(Error::Degenerate(
            "pilot has no positive eigenvalue; the D-trace program is unbounded".into(),
        ));
    }
    let spectrum_clipped = lam_min < SPECTRUM_FLOOR;
    let sigma = if spectrum_clipped {
        eig.reconstruct_with(|l| l.max(SPECTRUM_FLOOR))
    } else {
        pilot.clone()
    };

    let step = cfg.step.unwrap_or(1.0 / lam_max);
    if !(step > 0.0) || step >= 2.0 / lam_max {
        return Err(Error::InvalidParameter(format!(
            "step {step:.3e} outside (0, 2/lambda_max) = (0, {:.3e})",
            2.0 / lam_max
        )));
    }

    // Theta_0 = diag(1 / sigma_kk); the clipped pilot has a positive
    // diagonal.
    let mut theta = SymMatrix::from_diag(
        &sigma.diag().iter().map(|&v| 1.0 / v).collect::<Vec<_>>(),
    );

    let shrink = step * cfg.lambda;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let grad = dtrace_gradient(&theta, &sigma);
        let mut next = Array2::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let w = theta.get(i, j) - step * grad.get(i, j);
                let v = if i == j { w } else { soft_threshold(w, shrink) };
                next[(i, j)] = v;
                next[(j, i)] = v;
            }
        }
        let next = SymMatrix::from_symmetric_unchecked(next);
        let change = next.sub(&theta).norm(MatrixNorm::Frobenius);
        let scale = 1.0 + theta.norm(MatrixNorm::Frobenius);
        theta = next;
        if change <= cfg.tol * scale {
            converged = true;
            break;
        }
    }

    let kkt = dtrace_kkt_residual(&theta, &sigma, cfg.lambda);
    if !converged {
        return Err(Error::NoConvergence {
            what: "D-trace proximal gradient",
            iterations,
            residual: kkt,
        });
    }
    Ok((theta, DtraceReport { spectrum_clipped, iterations, kkt_residual: kkt }))
}

/// Gradient of the smooth part: `(Theta Sigma + Sigma Theta)/2 - I`.
pub fn dtrace_gradient(theta: &SymMatrix, sigma: &SymMatrix) -> SymMatrix {
    let ts = theta.as_array().dot(sigma.as_array());
    let d = theta.dim();
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            // (Theta Sigma + Sigma Theta)/2 = (TS + TS^T)/2 for symmetric
            // inputs.
            let v = 0.5 * (ts[(i, j)] + ts[(j, i)]) - if i == j { 1.0 } else { 0.0 };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    SymMatrix::from_symmetric_unchecked(out)
}

/// D-trace objective `(1/2) tr(Theta Sigma Theta) - tr(Theta)
/// + lambda sum_{k != l} |Theta_kl|`.
pub fn dtrace_objective(theta: &SymMatrix, sigma: &SymMatrix, lambda: f64) -> f64 {
    let ts = theta.as_array().dot(sigma.as_array());
    let quad = ts
        .dot(theta.as_array())
        .diag()
        .sum();
    let mut penalty = 0.0;
    let d = theta.dim();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                penalty += theta.get(i, j).abs();
            }
        }
    }
    0.5 * quad - theta.trace() + lambda * penalty
}

/// Entrywise subgradient residual of the first-order conditions: zero at
/// an exact solution.
pub fn dtrace_kkt_residual(theta: &SymMatrix, sigma: &SymMatrix, lambda: f64) -> f64 {
    let grad = dtrace_gradient(theta, sigma);
    let d = theta.dim();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let g = grad.get(i, j);
            let r = if i == j {
                g.abs()
            } else if theta.get(i, j) != 0.0 {
                (g + lambda * theta.get(i, j).signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(r);
        }
    }
    worst
}

#[inline]
fn soft_threshold(v: f64, s: f64) -> f64 {
    v.signum() * (v.abs() - s).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn diagonal_pilot_inverts_exactly() {
        let pilot = SymMatrix::from_diag(&[2.0, 0.5, 4.0]);
        let cfg = DtraceConfig::new(0.0).unwrap();
        let theta = dtrace_precision(&pilot, &cfg).unwrap();
        assert_relative_eq!(theta.get(0, 0), 0.5, epsilon = 1e-6);
        assert_relative_eq!(theta.get(1, 1), 2.0, epsilon = 1e-6);
        assert_relative_eq!(theta.get(2, 2), 0.25, epsilon = 1e-6);
        assert_eq!(theta.get(0, 1), 0.0);
    }

    #[test]
    fn diagonal_pilot_with_penalty_stays_diagonal() {
        let pilot = SymMatrix::from_diag(&[1.0, 3.0]);
        let cfg = DtraceConfig { lambda: 10.0, ..DtraceConfig::new(10.0).unwrap() };
        let theta = dtrace_precision(&pilot, &cfg).unwrap();
        assert_relative_eq!(theta.get(0, 0), 1.0, epsilon = 1e-6);
        assert_relative_eq!(theta.get(1, 1), 1.0 / 3.0, epsilon = 1e-6);
        assert_eq!(theta.get(0, 1), 0.0);
    }

    #[test]
    fn lambda_zero_converges_to_inverse() {
        let pilot = SymMatrix::from_array(&array![
            [2.0, 0.4, 0.1],
            [0.4, 1.5, -0.2],
            [0.1, -0.2, 1.0],
        ])
        .unwrap();
        let cfg = DtraceConfig::new(0.0).unwrap();
        let theta = dtrace_precision(&pilot, &cfg).unwrap();
        // Check Theta * pilot = I.
        let prod = theta.as_array().dot(pilot.as_array());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - expect).abs() <= 1e-5, "({i},{j}): {}", prod[(i, j)]);
            }
        }
    }

    #[test]
    fn objective_non_increasing_along_iterations() {
        let pilot = SymMatrix::from_array(&array![
            [1.5, 0.6, 0.2],
            [0.6, 2.0, -0.3],
            [0.2, -0.3, 1.2],
        ])
        .unwrap();
        let lambda = 0.05;
        let step = 1.0 / pilot.norm(MatrixNorm::Spectral);
        let mut theta = SymMatrix::from_diag(
            &pilot.diag().iter().map(|&v| 1.0 / v).collect::<Vec<_>>(),
        );
        let mut last = dtrace_objective(&theta, &pilot, lambda);
        for _ in 0..200 {
            let grad = dtrace_gradient(&theta, &pilot);
            let d = theta.dim();
            let mut next = Array2::zeros((d, d));
            for i in 0..d {
                for j in i..d {
                    let w = theta.get(i, j) - step * grad.get(i, j);
                    let v = if i == j { w } else { soft_threshold(w, step * lambda) };
                    next[(i, j)] = v;
                    next[(j, i)] = v;
                }
            }
            theta = SymMatrix::from_symmetric_unchecked(next);
            let obj = dtrace_objective(&theta, &pilot, lambda);
            assert!(obj <= last + 1e-12, "objective increased: {obj} > {last}");
            last = obj;
        }
    }

    #[test]
    fn oversized_step_rejected() {
        let pilot = SymMatrix::from_diag(&[1.0, 2.0]);
        let mut cfg = DtraceConfig::new(0.1).unwrap();
        cfg.step = Some(1.5); // 2 / lambda_max = 1.0
        assert!(dtrace_precision(&pilot, &cfg).is_err());
    }

    #[test]
    fn indefinite_pilot_gets_clipped() {
        let pilot = SymMatrix::from_array(&array![[1.0, 0.0], [0.0, -0.5]]).unwrap();
        let cfg = DtraceConfig::new(0.01).unwrap();
        let (theta, report) = dtrace_precision_with_report(&pilot, &cfg).unwrap();
        assert!(report.spectrum_clipped);
        assert!(theta.as_array().iter().all(|v| v.is_finite()));
    }
}

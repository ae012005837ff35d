//! Dense symmetric eigendecomposition.
//!
//! Householder tridiagonalization followed by the implicit-shift QL
//! iteration, the classic EISPACK `tred2`/`tql2` pair. Deterministic,
//! provably convergent, and fast enough for the dimensions this crate
//! targets (d up to a few hundred).

use crate::error::{Error, Result};

/// Iterations allowed per eigenvalue in the QL loop.
const MAX_QL_ITERS: usize = 30;

/// Full eigendecomposition of a symmetric matrix given as a row-major
/// `n x n` slice. Returns `(eigenvalues, eigenvectors)` with eigenvalues
/// ascending and eigenvectors stored as columns of the row-major matrix.
///
/// The caller is responsible for symmetry; only the lower triangle is read
/// during reduction.
pub fn symmetric_eigen_raw(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n);
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    if n == 1 {
        return Ok((vec![a[0]], vec![1.0]));
    }

    tred2(&mut v, &mut d, &mut e, n);
    tql2(&mut v, &mut d, &mut e, n)?;

    Ok((d, v))
}

/// Householder reduction to symmetric tridiagonal form, accumulating the
/// orthogonal transformation in `v`.
fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }

    for i in (1..n).rev() {
        // Scale to avoid under/overflow.
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            // Generate the Householder vector.
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // Apply the similarity transformation to the remaining rows.
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..(n - 1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + (n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal matrix, updating the
/// accumulated eigenvectors in `v`.
fn tql2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());

        // Find the first small subdiagonal element.
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is always zero, so the loop terminates at m <= n-1.
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(Error::NoConvergence {
                        what: "symmetric QL iteration",
                        iterations: iter,
                        residual: e[l].abs(),
                    });
                }

                // Compute the implicit shift.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // Implicit QL transformation.
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    // Rotate the eigenvector columns i and i+1.
                    for k in 0..n {
                        let h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(lambda: &[f64], v: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for (k, &lam) in lambda.iter().enumerate() {
                    acc += v[i * n + k] * lam * v[j * n + k];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    #[test]
    fn diagonal_matrix() {
        let a = [2.0, 0.0, 0.0, 1.0];
        let (mut lam, _) = symmetric_eigen_raw(&a, 2).unwrap();
        lam.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((lam[0] - 1.0).abs() < 1e-14);
        assert!((lam[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn off_diagonal_pair() {
        let a = [0.0, 1.0, 1.0, 0.0];
        let (mut lam, _) = symmetric_eigen_raw(&a, 2).unwrap();
        lam.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((lam[0] + 1.0).abs() < 1e-14);
        assert!((lam[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 17;
        let mut a = vec![0.0; n * n];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in 0..=i {
                let x = next();
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        let (lam, v) = symmetric_eigen_raw(&a, n).unwrap();
        let rec = reconstruct(&lam, &v, n);
        let mut err = 0.0f64;
        let mut nrm = 0.0f64;
        for i in 0..n * n {
            err += (rec[i] - a[i]).powi(2);
            nrm += a[i].powi(2);
        }
        assert!(err.sqrt() <= 1e-12 * nrm.sqrt().max(1.0), "reconstruction error too large");

        // V^T V = I
        for p in 0..n {
            for q in 0..n {
                let mut dot = 0.0;
                for k in 0..n {
                    dot += v[k * n + p] * v[k * n + q];
                }
                let expect = if p == q { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }
}

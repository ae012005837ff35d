//! Hot inner loops shared by the estimators and tuning solvers.
//!
//! Everything here works on contiguous slices and is written branch-free so
//! the compiler can vectorize. Min/max go through comparison-select form:
//! the `f64::min`-family NaN semantics block SIMD lowering, and these
//! sweeps never see NaN. Accumulations use four lanes; the summation
//! order is fixed, so results are identical from run to run regardless of
//! the rayon thread count (parallel callers merge per-index partials in a
//! deterministic order).

/// `min` without NaN bookkeeping; vectorizes to a compare-select.
#[inline(always)]
fn fmin(a: f64, b: f64) -> f64 {
    if a < b { a } else { b }
}

/// `max` without NaN bookkeeping.
#[inline(always)]
fn fmax(a: f64, b: f64) -> f64 {
    if a > b { a } else { b }
}

/// Clamp to `[-t, t]` in compare-select form; `t = +inf` is the identity.
#[inline(always)]
fn fclamp(v: f64, t: f64) -> f64 {
    fmax(fmin(v, t), -t)
}

/// Fill `out` with the pairwise products `(xk_i - xk_j)(xl_i - xl_j) / 2`
/// over all unordered pairs `i < j`, in the canonical pair order.
pub fn fill_pair_products(ck: &[f64], cl: &[f64], out: &mut Vec<f64>) {
    let n = ck.len();
    debug_assert_eq!(cl.len(), n);
    out.clear();
    out.resize(n * (n - 1) / 2, 0.0);
    let mut offset = 0;
    for i in 0..n {
        let (cki, cli) = (ck[i], cl[i]);
        let tail_k = &ck[i + 1..];
        let tail_l = &cl[i + 1..];
        let dst = &mut out[offset..offset + tail_k.len()];
        for ((d, &a), &b) in dst.iter_mut().zip(tail_k).zip(tail_l) {
            *d = (cki - a) * (cli - b) * 0.5;
        }
        offset += tail_k.len();
    }
}

/// `sum_i clamp(z_i, -tau, tau)` with four-lane accumulation.
/// `tau = +inf` degenerates to the plain sum.
pub fn clamped_sum(z: &[f64], tau: f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = z.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        acc[0] += fclamp(c[0], tau);
        acc[1] += fclamp(c[1], tau);
        acc[2] += fclamp(c[2], tau);
        acc[3] += fclamp(c[3], tau);
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &v in rem {
        total += fclamp(v, tau);
    }
    total
}

/// `sum_i min(a_i, s)` over nonnegative `a`; the workhorse of the
/// truncated-moment equation solves.
pub fn capped_sum(a: &[f64], s: f64) -> f64 {
    let mut acc = [0.0f64; 8];
    let chunks = a.chunks_exact(8);
    let rem = chunks.remainder();
    for c in chunks {
        acc[0] += fmin(c[0], s);
        acc[1] += fmin(c[1], s);
        acc[2] += fmin(c[2], s);
        acc[3] += fmin(c[3], s);
        acc[4] += fmin(c[4], s);
        acc[5] += fmin(c[5], s);
        acc[6] += fmin(c[6], s);
        acc[7] += fmin(c[7], s);
    }
    let mut total = ((acc[0] + acc[1]) + (acc[2] + acc[3]))
        + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for &v in rem {
        total += fmin(v, s);
    }
    total
}

/// Fused kernel for the adaptive truncation hot loop: write the pair
/// products into `z`, their squares into `a`, and return
/// `(sum, max, nonzero count)` of the squares, all in one sweep over the
/// pair set.
pub fn fill_pair_products_and_squares(
    ck: &[f64],
    cl: &[f64],
    z: &mut Vec<f64>,
    a: &mut Vec<f64>,
) -> (f64, f64, usize) {
    let n = ck.len();
    let n_pairs = n * (n - 1) / 2;
    z.clear();
    z.resize(n_pairs, 0.0);
    a.clear();
    a.resize(n_pairs, 0.0);
    let mut total = [0.0f64; 4];
    let mut maxv = [0.0f64; 4];
    let mut zeros = [0.0f64; 4];
    let mut offset = 0;
    for i in 0..n {
        let (cki, cli) = (ck[i], cl[i]);
        let tail_k = &ck[i + 1..];
        let tail_l = &cl[i + 1..];
        let len = tail_k.len();
        let zdst = &mut z[offset..offset + len];
        let adst = &mut a[offset..offset + len];
        let mut t = 0;
        while t + 4 <= len {
            for lane in 0..4 {
                let v = (cki - tail_k[t + lane]) * (cli - tail_l[t + lane]) * 0.5;
                let q = v * v;
                zdst[t + lane] = v;
                adst[t + lane] = q;
                total[lane] += q;
                maxv[lane] = fmax(maxv[lane], q);
                zeros[lane] += (q == 0.0) as u8 as f64;
            }
            t += 4;
        }
        while t < len {
            let v = (cki - tail_k[t]) * (cli - tail_l[t]) * 0.5;
            let q = v * v;
            zdst[t] = v;
            adst[t] = q;
            total[0] += q;
            maxv[0] = fmax(maxv[0], q);
            zeros[0] += (q == 0.0) as u8 as f64;
            t += 1;
        }
        offset += len;
    }
    let t = (total[0] + total[1]) + (total[2] + total[3]);
    let m = fmax(fmax(maxv[0], maxv[1]), fmax(maxv[2], maxv[3]));
    let zc = (zeros[0] + zeros[1]) + (zeros[2] + zeros[3]);
    (t, m, n_pairs - zc as usize)
}

/// Write `z_i^2` into `out` and return `(sum, max, nonzero count)` of the
/// squares in the same pass.
pub fn fill_squares_with_stats(z: &[f64], out: &mut Vec<f64>) -> (f64, f64, usize) {
    let n = z.len();
    out.clear();
    out.resize(n, 0.0);
    let mut total = [0.0f64; 4];
    let mut maxv = [0.0f64; 4];
    let mut zeros = [0.0f64; 4];
    let mut i = 0;
    while i + 4 <= n {
        let a0 = z[i] * z[i];
        let a1 = z[i + 1] * z[i + 1];
        let a2 = z[i + 2] * z[i + 2];
        let a3 = z[i + 3] * z[i + 3];
        out[i] = a0;
        out[i + 1] = a1;
        out[i + 2] = a2;
        out[i + 3] = a3;
        total[0] += a0;
        total[1] += a1;
        total[2] += a2;
        total[3] += a3;
        maxv[0] = fmax(maxv[0], a0);
        maxv[1] = fmax(maxv[1], a1);
        maxv[2] = fmax(maxv[2], a2);
        maxv[3] = fmax(maxv[3], a3);
        zeros[0] += (a0 == 0.0) as u8 as f64;
        zeros[1] += (a1 == 0.0) as u8 as f64;
        zeros[2] += (a2 == 0.0) as u8 as f64;
        zeros[3] += (a3 == 0.0) as u8 as f64;
        i += 4;
    }
    let mut t = (total[0] + total[1]) + (total[2] + total[3]);
    let mut m = fmax(fmax(maxv[0], maxv[1]), fmax(maxv[2], maxv[3]));
    let mut zc = (zeros[0] + zeros[1]) + (zeros[2] + zeros[3]);
    while i < n {
        let a = z[i] * z[i];
        out[i] = a;
        t += a;
        m = fmax(m, a);
        zc += (a == 0.0) as u8 as f64;
        i += 1;
    }
    (t, m, n - zc as usize)
}

/// `(sum, max, nonzero count)` of the squared residuals `(z_i - theta)^2`.
pub fn residual_sq_stats(z: &[f64], theta: f64) -> (f64, f64, usize) {
    let mut total = 0.0f64;
    let mut maxv = 0.0f64;
    let mut zeros = 0.0f64;
    for &v in z {
        let r = v - theta;
        let a = r * r;
        total += a;
        maxv = maxv.max(a);
        zeros += (a == 0.0) as u8 as f64;
    }
    (total, maxv, z.len() - zeros as usize)
}

/// `sum_i min((z_i - theta)^2, s)`.
pub fn capped_residual_sq_sum(z: &[f64], theta: f64, s: f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = z.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        let r0 = c[0] - theta;
        let r1 = c[1] - theta;
        let r2 = c[2] - theta;
        let r3 = c[3] - theta;
        acc[0] += fmin(r0 * r0, s);
        acc[1] += fmin(r1 * r1, s);
        acc[2] += fmin(r2 * r2, s);
        acc[3] += fmin(r3 * r3, s);
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &v in rem {
        let r = v - theta;
        total += fmin(r * r, s);
    }
    total
}

/// Huber score `sum_i clamp(z_i - theta, -tau, tau)` and the count of
/// unclipped residuals (the negated derivative of the score in `theta`).
pub fn huber_score(z: &[f64], theta: f64, tau: f64) -> (f64, usize) {
    let mut acc = [0.0f64; 4];
    let mut cnt = [0.0f64; 4];
    let chunks = z.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        let r0 = c[0] - theta;
        let r1 = c[1] - theta;
        let r2 = c[2] - theta;
        let r3 = c[3] - theta;
        acc[0] += fclamp(r0, tau);
        acc[1] += fclamp(r1, tau);
        acc[2] += fclamp(r2, tau);
        acc[3] += fclamp(r3, tau);
        cnt[0] += (r0.abs() < tau) as u8 as f64;
        cnt[1] += (r1.abs() < tau) as u8 as f64;
        cnt[2] += (r2.abs() < tau) as u8 as f64;
        cnt[3] += (r3.abs() < tau) as u8 as f64;
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    let mut count = (cnt[0] + cnt[1]) + (cnt[2] + cnt[3]);
    for &v in rem {
        let r = v - theta;
        total += fclamp(r, tau);
        count += (r.abs() < tau) as u8 as f64;
    }
    (total, count as usize)
}

/// Plain four-lane sum; fixed association order.
pub fn sum(z: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = z.chunks_exact(4);
    let rem = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &v in rem {
        total += v;
    }
    total
}

//! Quadrature on sampled data and adaptive Simpson for callables.

/// Running integral `∫_{t_0}^{t_i} v` on (possibly non-uniform) samples.
/// Each interval integrates the cubic through the four nearest samples with
/// two-point Gauss, which is exact for cubics.
pub fn cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let n = times.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let g = 0.5 / 3f64.sqrt();
    for i in 0..n - 1 {
        let (lo, hi) = stencil(i, n);
        let xs = &times[lo..hi];
        let ys = &values[lo..hi];
        let (a, b) = (times[i], times[i + 1]);
        let mid = 0.5 * (a + b);
        let len = b - a;
        let q = 0.5 * len * (lagrange(xs, ys, mid - g * len) + lagrange(xs, ys, mid + g * len));
        out[i + 1] = out[i] + q;
    }
    out
}

pub fn integrate(times: &[f64], values: &[f64]) -> f64 {
    cumulative(times, values).last().copied().unwrap_or(0.0)
}

/// Indices `[lo, hi)` of up to four samples around interval `i`.
fn stencil(i: usize, n: usize) -> (usize, usize) {
    let width = n.min(4);
    let lo = i.saturating_sub(1).min(n - width);
    (lo, lo + width)
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (j, (&xj, &yj)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (m, &xm) in xs.iter().enumerate() {
            if m != j {
                l *= (x - xm) / (xj - xm);
            }
        }
        acc += yj * l;
    }
    acc
}

/// Derivative of the local interpolating cubic at sample `i`.
pub fn derivative_at(times: &[f64], values: &[f64], i: usize) -> f64 {
    let n = times.len();
    let (lo, hi) = stencil(i.min(n.saturating_sub(2)), n);
    let xs = &times[lo..hi];
    let ys = &values[lo..hi];
    let x = times[i];
    let mut acc = 0.0;
    for j in 0..xs.len() {
        // d/dx Π_{m≠j} (x − x_m)/(x_j − x_m)
        let mut denom = 1.0;
        for m in 0..xs.len() {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        let mut num = 0.0;
        for k in 0..xs.len() {
            if k == j {
                continue;
            }
            let mut p = 1.0;
            for m in 0..xs.len() {
                if m != j && m != k {
                    p *= x - xs[m];
                }
            }
            num += p;
        }
        acc += ys[j] * num / denom;
    }
    acc
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // Start from a few panels so periodic integrands are not undersampled.
    let panels = 16;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

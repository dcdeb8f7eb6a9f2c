//! Dense real polynomials, coefficients in ascending powers.

pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn add(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len().max(q.len())];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c;
    }
    for (i, &c) in q.iter().enumerate() {
        out[i] += c;
    }
    out
}

pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

pub fn scale(p: &[f64], s: f64) -> Vec<f64> {
    p.iter().map(|c| c * s).collect()
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

/// Drops trailing zero coefficients.
pub fn trim(p: &[f64]) -> Vec<f64> {
    let end = p.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    p[..end].to_vec()
}

/// Real roots, ascending. Recurses on the derivative to split the line into
/// monotone pieces, then bisects each sign change.
pub fn real_roots(p: &[f64]) -> Vec<f64> {
    let p = trim(p);
    if p.len() <= 1 {
        return Vec::new();
    }
    if p.len() == 2 {
        return vec![-p[0] / p[1]];
    }
    let lead = *p.last().unwrap();
    let bound = 1.0 + p[..p.len() - 1].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
    let mut knots = vec![-bound];
    knots.extend(real_roots(&derivative(&p)).into_iter().filter(|x| x.abs() < bound));
    knots.push(bound);
    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (eval(&p, lo), eval(&p, hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(&p, mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if eval(&p, bound) == 0.0 {
        roots.push(bound);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    roots
}

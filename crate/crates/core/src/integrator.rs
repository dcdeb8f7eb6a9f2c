//! Exponential time differencing for diagonal semilinear systems
//! `ẏ = −L y + N(t, y)`: the linear part is propagated exactly, the
//! nonlinearity by the fourth-order Cox–Matthews scheme (ETDRK4).

use crate::error::{BidomainError, Result};

pub trait Semilinear: Sync {
    fn dim(&self) -> usize;

    /// Diagonal decay rates `L`.
    fn rates(&self) -> &[f64];

    fn nonlinear(&self, t: f64, y: &[f64], out: &mut [f64]);

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.nonlinear(t, y, out);
        for ((o, l), v) in out.iter_mut().zip(self.rates()).zip(y) {
            *o -= l * v;
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub nonlinear_evals: usize,
    /// Largest accepted local error estimate (weighted, per step).
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("empty trajectory")
    }
}

/// `φ₁, φ₂, φ₃` at `z`.
pub fn phi(z: f64) -> [f64; 3] {
    if z.abs() < 1.0 {
        // φ_k(z) = Σ zⁿ / (n+k)!
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = 1.0 / factorial(k + 1);
            let mut sum = term;
            for n in 1..24 {
                term *= z / (n + k + 1) as f64;
                sum += term;
            }
            *o = sum;
        }
        out
    } else {
        let p1 = z.exp_m1() / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Per-component ETDRK4 weights for one step size.
struct Coefficients {
    e: Vec<f64>,
    e_half: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl Coefficients {
    fn new(rates: &[f64], h: f64) -> Self {
        let n = rates.len();
        let mut c = Coefficients {
            e: Vec::with_capacity(n),
            e_half: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &l in rates {
            let z = -l * h;
            let [p1, p2, p3] = phi(z);
            let half = phi(0.5 * z);
            c.e.push(z.exp());
            c.e_half.push((0.5 * z).exp());
            c.q.push(0.5 * h * half[0]);
            c.f1.push(h * (p1 - 3.0 * p2 + 4.0 * p3));
            c.f2.push(h * (p2 - 2.0 * p3));
            c.f3.push(h * (-p2 + 4.0 * p3));
        }
        c
    }
}

struct Workspace {
    na: Vec<f64>,
    nb: Vec<f64>,
    nc: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            na: vec![0.0; n],
            nb: vec![0.0; n],
            nc: vec![0.0; n],
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
        }
    }
}

/// One ETDRK4 step given `n0 = N(t, y)`.
fn step(
    sys: &impl Semilinear,
    k: &Coefficients,
    t: f64,
    h: f64,
    y: &[f64],
    n0: &[f64],
    ws: &mut Workspace,
    out: &mut [f64],
) {
    let n = y.len();
    for i in 0..n {
        ws.a[i] = k.e_half[i] * y[i] + k.q[i] * n0[i];
    }
    sys.nonlinear(t + 0.5 * h, &ws.a, &mut ws.na);
    for i in 0..n {
        ws.b[i] = k.e_half[i] * y[i] + k.q[i] * ws.na[i];
    }
    sys.nonlinear(t + 0.5 * h, &ws.b, &mut ws.nb);
    for i in 0..n {
        ws.c[i] = k.e_half[i] * ws.a[i] + k.q[i] * (2.0 * ws.nb[i] - n0[i]);
    }
    sys.nonlinear(t + h, &ws.c, &mut ws.nc);
    for i in 0..n {
        out[i] = k.e[i] * y[i]
            + k.f1[i] * n0[i]
            + 2.0 * k.f2[i] * (ws.na[i] + ws.nb[i])
            + k.f3[i] * ws.nc[i];
    }
}

/// Fixed-step ETDRK4 from `t0` to `t1`; every step is recorded.
pub fn integrate_fixed(
    sys: &impl Semilinear,
    y0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 || !(t1 > t0) {
        return Err(BidomainError::invalid("steps", "need t1 > t0 and at least one step"));
    }
    let n = sys.dim();
    check_len(n, y0.len())?;
    let h = (t1 - t0) / steps as f64;
    let k = Coefficients::new(sys.rates(), h);
    let mut ws = Workspace::new(n);
    let mut n0 = vec![0.0; n];
    let mut y = y0.to_vec();
    let mut next = vec![0.0; n];
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y.clone()],
        stats: IntegratorStats::default(),
    };
    for s in 0..steps {
        let t = t0 + h * s as f64;
        sys.nonlinear(t, &y, &mut n0);
        step(sys, &k, t, h, &y, &n0, &mut ws, &mut next);
        std::mem::swap(&mut y, &mut next);
        let t_new = if s + 1 == steps { t1 } else { t0 + h * (s + 1) as f64 };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(BidomainError::NonFinite { t: t_new });
        }
        traj.times.push(t_new);
        traj.states.push(y.clone());
        traj.stats.steps += 1;
        traj.stats.nonlinear_evals += 4;
    }
    Ok(traj)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(BidomainError::DimensionMismatch { expected, got });
    }
    Ok(())
}

const MAX_STEPS: usize = 5_000_000;

/// Adaptive ETDRK4 with step doubling. The weighted local error
/// `max_i |y_i^{h/2,h/2} − y_i^{h}| / (15 (1 + |y_i|))` of every accepted
/// step is at most `tol`; the more accurate two-half-step result is kept.
/// The state is recorded at every entry of `samples` (strictly increasing,
/// all `≥ t0`); a sample equal to `t0` records the initial state.
pub fn integrate(
    sys: &impl Semilinear,
    y0: &[f64],
    t0: f64,
    samples: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(BidomainError::invalid("solver.tol", format!("must be positive, got {tol}")));
    }
    if samples.is_empty() || samples[0] < t0 || samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BidomainError::invalid(
            "samples",
            "sample times must be strictly increasing and not before t0",
        ));
    }
    let n = sys.dim();
    check_len(n, y0.len())?;
    let t_end = *samples.last().unwrap();
    let span = t_end - t0;
    let h_min = 1e-12 * span.max(t0.abs()).max(1e-300);

    let mut traj = Trajectory {
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        stats: IntegratorStats::default(),
    };
    let mut next_sample = 0;
    if samples[0] == t0 {
        traj.times.push(t0);
        traj.states.push(y0.to_vec());
        next_sample = 1;
    }

    let mut ws = Workspace::new(n);
    let mut n0 = vec![0.0; n];
    let mut n_mid = vec![0.0; n];
    let mut y = y0.to_vec();
    let mut big = vec![0.0; n];
    let mut half = vec![0.0; n];
    let mut two = vec![0.0; n];
    let mut t = t0;
    let mut h = (1e-3 * span).max(h_min);

    while next_sample < samples.len() {
        let target = samples[next_sample];
        let h_try = h.min(target - t);
        let landing = h_try >= target - t;

        sys.nonlinear(t, &y, &mut n0);
        let kb = Coefficients::new(sys.rates(), h_try);
        let kh = Coefficients::new(sys.rates(), 0.5 * h_try);
        step(sys, &kb, t, h_try, &y, &n0, &mut ws, &mut big);
        step(sys, &kh, t, 0.5 * h_try, &y, &n0, &mut ws, &mut half);
        sys.nonlinear(t + 0.5 * h_try, &half, &mut n_mid);
        step(sys, &kh, t + 0.5 * h_try, 0.5 * h_try, &half, &n_mid, &mut ws, &mut two);
        traj.stats.nonlinear_evals += 11;

        let mut err = 0.0f64;
        let mut worst = 0;
        let mut finite = true;
        for i in 0..n {
            if !two[i].is_finite() || !big[i].is_finite() {
                finite = false;
                worst = i;
                break;
            }
            let e = (two[i] - big[i]).abs() / (15.0 * (1.0 + two[i].abs()));
            if e > err {
                err = e;
                worst = i;
            }
        }
        let allowed = tol.max(16.0 * f64::EPSILON);
        if finite && err <= allowed {
            t = if landing { target } else { t + h_try };
            std::mem::swap(&mut y, &mut two);
            traj.stats.steps += 1;
            traj.stats.max_error = traj.stats.max_error.max(err);
            if landing {
                traj.times.push(t);
                traj.states.push(y.clone());
                next_sample += 1;
            }
            let grow = if err == 0.0 { 4.0 } else { (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 4.0) };
            // A step shortened to land on a sample does not shrink the next one.
            h = if landing && h_try < h { h.max(h_try * grow) } else { h_try * grow };
        } else {
            traj.stats.rejected += 1;
            let shrink = if finite { (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 0.9) } else { 0.2 };
            h = h_try * shrink;
            if h < h_min {
                if !finite {
                    return Err(BidomainError::NonFinite { t });
                }
                return Err(BidomainError::StepSizeUnderflow {
                    t,
                    h,
                    component: worst,
                });
            }
        }
        if traj.stats.steps + traj.stats.rejected > MAX_STEPS {
            return Err(BidomainError::StepSizeUnderflow { t, h, component: worst });
        }
    }
    Ok(traj)
}

/// `count + 1` equally spaced times covering `[t0, t1]`.
pub fn uniform_samples(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    let count = count.max(1);
    (0..=count)
        .map(|i| if i == count { t1 } else { t0 + (t1 - t0) * i as f64 / count as f64 })
        .collect()
}

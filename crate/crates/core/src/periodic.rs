//! Poincaré map of the Galerkin system and the search for its fixed point
//! inside the a-priori energy ball.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{packed_energy, GalerkinSystem, ModalState};
use crate::error::{BidomainError, Result};
use crate::integrator::{uniform_samples, Trajectory};

/// One period `[0, T]` from the packed state `y`, sampled at `samples + 1`
/// equally spaced times. The Poincaré map is the final sample.
pub fn integrate_period(sys: &GalerkinSystem<'_>, y: &[f64], tol: f64, samples: usize) -> Result<Trajectory> {
    let period = sys.forcing.period();
    let start = ModalState::from_packed(y, 0.0);
    sys.integrate(&start, &uniform_samples(0.0, period, samples), tol)
}

/// `S(x) = (α(T), β(T))` for the solution started from `x` at `t = 0`.
pub fn poincare_map(sys: &GalerkinSystem<'_>, x: &ModalState, tol: f64, samples: usize) -> Result<ModalState> {
    let tr = integrate_period(sys, &x.packed(), tol, samples)?;
    Ok(ModalState::from_packed(tr.last(), 0.0))
}

fn weighted_norm(y: &[f64], r: f64) -> f64 {
    packed_energy(y, r).sqrt()
}

/// Packed state drawn uniformly from the energy ball of radius `radius`
/// (or its boundary sphere when `on_sphere`).
pub fn sample_ball(rng: &mut ChaCha8Rng, modes: usize, r: f64, radius: f64, on_sphere: bool) -> Vec<f64> {
    let dim = 2 * modes;
    let mut z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if on_sphere {
        1.0
    } else {
        rng.random_range(0.0..1.0f64).powf(1.0 / dim as f64)
    };
    for (i, v) in z.iter_mut().enumerate() {
        *v *= radius * scale / norm;
        if i < modes {
            *v /= r.sqrt();
        }
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallReport {
    pub radius: f64,
    /// `(‖x‖, ‖S(x)‖)` in the energy norm per sample.
    pub samples: Vec<(f64, f64)>,
    pub max_image_norm: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Maps `n_samples` states (half on the sphere, half inside the ball,
/// the origin first) and compares the image norms with `R(1 + tolerance)`.
#[allow(clippy::too_many_arguments)]
pub fn ball_invariance_test(
    sys: &GalerkinSystem<'_>,
    radius: f64,
    r: f64,
    n_samples: usize,
    tol: f64,
    samples_per_period: usize,
    seed: u64,
    tolerance: f64,
) -> Result<BallReport> {
    if n_samples == 0 {
        return Err(BidomainError::invalid("n_samples", "need at least one sample"));
    }
    let m = sys.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..n_samples)
        .map(|i| {
            if i == 0 {
                vec![0.0; 2 * m]
            } else {
                sample_ball(&mut rng, m, r, radius, i % 2 == 1)
            }
        })
        .collect();
    let images: Vec<Result<(f64, f64)>> = starts
        .par_iter()
        .map(|y| {
            let tr = integrate_period(sys, y, tol, samples_per_period)?;
            Ok((weighted_norm(y, r), weighted_norm(tr.last(), r)))
        })
        .collect();
    let samples = images.into_iter().collect::<Result<Vec<_>>>()?;
    let max_image_norm = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(BallReport {
        radius,
        samples,
        max_image_norm,
        tolerance,
        pass: max_image_norm <= radius * (1.0 + tolerance),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceleration {
    None,
    /// Residual extrapolation over the last `m` iterates.
    Anderson(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub accel: Acceleration,
    pub integrator_tol: f64,
    pub samples_per_period: usize,
    /// Energy weight `r` of the ball norm.
    pub r: f64,
    /// A-priori radius; the iteration aborts once an iterate exceeds `10 R`.
    pub radius: f64,
    /// Reject extrapolated iterates that leave the ball.
    pub ball_guard: bool,
    /// Iterations without improvement of the best residual before damping.
    pub stall_window: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        PeriodicOptions {
            tol: 1e-8,
            max_iter: 500,
            accel: Acceleration::Anderson(5),
            integrator_tol: 1e-11,
            samples_per_period: 200,
            r: 1.0,
            radius: f64::INFINITY,
            ball_guard: true,
            stall_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSolveReport {
    pub fixed_point: ModalState,
    pub residual: f64,
    pub iterations: usize,
    pub radius: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    /// Energy norm of every iterate.
    pub in_ball_history: Vec<f64>,
    /// Final damping factor of the Krasnoselskii iteration (1 = undamped).
    pub damping: f64,
    /// One period from the fixed point.
    pub trajectory: Trajectory,
}

struct Anderson {
    window: usize,
    dx: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    prev: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(window: usize) -> Self {
        Anderson {
            window,
            dx: Vec::new(),
            df: Vec::new(),
            prev: None,
        }
    }

    fn reset(&mut self) {
        self.dx.clear();
        self.df.clear();
        self.prev = None;
    }

    /// Next iterate from `x` and residual `f = S(x) − x`, mixing with `theta`.
    fn update(&mut self, x: &[f64], f: &[f64], theta: f64, weights: &[f64]) -> Vec<f64> {
        if let Some((px, pf)) = self.prev.take() {
            self.dx.push(x.iter().zip(&px).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            if self.dx.len() > self.window {
                self.dx.remove(0);
                self.df.remove(0);
            }
        }
        self.prev = Some((x.to_vec(), f.to_vec()));
        let picard: Vec<f64> = x.iter().zip(f).map(|(a, b)| a + theta * b).collect();
        let k = self.df.len();
        if self.window == 0 || k == 0 {
            return picard;
        }
        let n = x.len();
        let a = DMatrix::from_fn(n, k, |i, j| self.df[j][i] * weights[i]);
        let b = DVector::from_iterator(n, f.iter().zip(weights).map(|(v, w)| v * w));
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return picard;
        }
        let gamma = match svd.solve(&b, 1e-10 * smax) {
            Ok(g) => g,
            Err(_) => return picard,
        };
        let mut out = picard;
        for j in 0..k {
            for i in 0..n {
                out[i] -= gamma[j] * (self.dx[j][i] + theta * self.df[j][i]);
            }
        }
        if out.iter().all(|v| v.is_finite()) {
            out
        } else {
            x.iter().zip(f).map(|(a, b)| a + theta * b).collect()
        }
    }
}

/// Fixed point of the Poincaré map by Picard iteration, optionally with
/// Anderson extrapolation, falling back to damped iteration when the
/// residual stalls.
pub fn solve_periodic(sys: &GalerkinSystem<'_>, x0: &ModalState, opts: &PeriodicOptions) -> Result<PeriodicSolveReport> {
    if !(opts.tol > 0.0) {
        return Err(BidomainError::invalid("solver.periodic_tol", "must be positive"));
    }
    let m = sys.modes();
    if x0.modes() != m {
        return Err(BidomainError::DimensionMismatch {
            expected: m,
            got: x0.modes(),
        });
    }
    let weights: Vec<f64> = (0..2 * m).map(|i| if i < m { opts.r.sqrt() } else { 1.0 }).collect();
    let window = match opts.accel {
        Acceleration::None => 0,
        Acceleration::Anderson(w) => w,
    };
    let mut anderson = Anderson::new(window);
    let limit = 10.0 * opts.radius;

    let mut x = x0.packed();
    let mut theta = 1.0;
    let mut residual_history = Vec::new();
    let mut in_ball_history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Trajectory)> = None;
    let mut since_best = 0;

    for iteration in 0..=opts.max_iter {
        let norm = weighted_norm(&x, opts.r);
        in_ball_history.push(norm);
        if !(norm <= limit) {
            return Err(BidomainError::Divergence {
                iteration,
                norm,
                limit,
                history: in_ball_history,
            });
        }
        let tr = integrate_period(sys, &x, opts.integrator_tol, opts.samples_per_period)?;
        let f: Vec<f64> = tr.last().iter().zip(&x).map(|(s, v)| s - v).collect();
        let res = weighted_norm(&f, opts.r);
        residual_history.push(res);

        let improved = best.as_ref().is_none_or(|b| res < b.0);
        if improved {
            best = Some((res, x.clone(), tr));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if res <= opts.tol || iteration == opts.max_iter {
            break;
        }
        if since_best >= opts.stall_window {
            theta *= 0.5;
            since_best = 0;
            anderson.reset();
            // Restart the damped iteration from the best iterate.
            let b = best.as_ref().unwrap();
            let fb: Vec<f64> = b.2.last().iter().zip(&b.1).map(|(s, v)| s - v).collect();
            x = b.1.iter().zip(&fb).map(|(v, d)| v + theta * d).collect();
            continue;
        }
        let mut next = anderson.update(&x, &f, theta, &weights);
        if opts.ball_guard && weighted_norm(&next, opts.r) > opts.radius && window > 0 {
            anderson.reset();
            next = x.iter().zip(&f).map(|(v, d)| v + theta * d).collect();
        }
        x = next;
    }

    let (residual, xb, trajectory) = best.expect("at least one iteration");
    Ok(PeriodicSolveReport {
        fixed_point: ModalState::from_packed(&xb, 0.0),
        residual,
        iterations: residual_history.len(),
        radius: opts.radius,
        converged: residual <= opts.tol,
        residual_history,
        in_ball_history,
        damping: theta,
        trajectory,
    })
}

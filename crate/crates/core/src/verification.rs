//! A-posteriori checks on computed solutions: weak-form residuals, the
//! energy identity, error propagation between runs and Galerkin
//! self-convergence.

use crate::certificate::{one_sided_lipschitz, Lattice};
use crate::dynamics::{GalerkinSystem, ModalState};
use crate::eigenbasis::EigenBasis;
use crate::error::{BidomainError, Result};
use crate::forcing::{Forcing, ForcingComponent};
use crate::integrator::{self, uniform_samples, Trajectory};
use crate::ionic::{IonicModel, ModelVariant, Reaction};
use crate::norms::SobolevNorms;
use crate::operators::BidomainOperator;
use crate::periodic::{solve_periodic, PeriodicOptions, PeriodicSolveReport};
use crate::quadrature;

/// Smooth time window of a weak test function `χ(t) ψ_ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// `χ ≡ 1` on the whole span (boundary terms remain).
    Constant,
    /// `χ = (4(t−a)(b−t)/(b−a)²)²` on `[a, b]`, zero outside.
    Bump { a: f64, b: f64 },
}

impl Window {
    fn value(&self, t: f64) -> f64 {
        match *self {
            Window::Constant => 1.0,
            Window::Bump { a, b } => {
                if t <= a || t >= b {
                    0.0
                } else {
                    let p = 4.0 * (t - a) * (b - t) / ((b - a) * (b - a));
                    p * p
                }
            }
        }
    }

    fn slope(&self, t: f64) -> f64 {
        match *self {
            Window::Constant => 0.0,
            Window::Bump { a, b } => {
                if t <= a || t >= b {
                    0.0
                } else {
                    let l2 = (b - a) * (b - a);
                    let p = 4.0 * (t - a) * (b - t) / l2;
                    2.0 * p * 4.0 * (a + b - 2.0 * t) / l2
                }
            }
        }
    }
}

/// Constant window plus `bumps` bumps on consecutive sample-aligned pieces.
pub fn standard_windows(times: &[f64], bumps: usize) -> Vec<Window> {
    let mut out = vec![Window::Constant];
    let n = times.len() - 1;
    if bumps == 0 || n < bumps {
        return out;
    }
    for k in 0..bumps {
        let a = times[k * n / bumps];
        let b = times[(k + 1) * n / bumps];
        out.push(Window::Bump { a, b });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    pub mode: usize,
    pub window: usize,
    /// Residual of the `u` identity.
    pub u: f64,
    /// Residual of the `w` identity.
    pub w: f64,
}

/// `|[χ c_ℓ] − ∫χ′ c_ℓ + ∫χ (λ_ℓ α_ℓ + (f,ψ_ℓ) − ⟨s,ψ_ℓ⟩)|` and the analogue
/// for `w`, for test functions `χ ψ_ℓ` with `ψ_ℓ` from `test_basis` (which
/// may extend beyond the Galerkin order to expose truncation).
pub fn weak_residual(
    traj: &Trajectory,
    sys: &GalerkinSystem<'_>,
    test_basis: &EigenBasis,
    test_modes: usize,
    windows: &[Window],
) -> Result<Vec<WeakResidual>> {
    if test_modes > test_basis.modes() {
        return Err(BidomainError::invalid(
            "test_modes",
            format!("{test_modes} exceeds the test basis size {}", test_basis.modes()),
        ));
    }
    let n = traj.len();
    let nodes = test_basis.nodes();
    // Per sample: test coefficients of u, w and the reaction/forcing terms.
    let mut cu = vec![vec![0.0; n]; test_modes];
    let mut cw = vec![vec![0.0; n]; test_modes];
    let mut gu = vec![vec![0.0; n]; test_modes];
    let mut gw = vec![vec![0.0; n]; test_modes];
    for (i, (y, &t)) in traj.states.iter().zip(&traj.times).enumerate() {
        let (u, w) = sys.nodal_fields(y);
        let f: Vec<f64> = u.iter().zip(&w).map(|(&a, &b)| sys.model.f(a, b)).collect();
        let g: Vec<f64> = u.iter().zip(&w).map(|(&a, &b)| sys.model.g(a, b)).collect();
        let (pu, pw) = (test_basis.project(&u), test_basis.project(&w));
        let (pf, pg) = (test_basis.project(&f), test_basis.project(&g));
        let ps = test_basis.project(&sys.forcing.source(t, nodes));
        for l in 0..test_modes {
            cu[l][i] = pu[l];
            cw[l][i] = pw[l];
            gu[l][i] = test_basis.eigenvalues[l] * pu[l] + pf[l] - ps[l];
            gw[l][i] = pg[l];
        }
    }
    let times = &traj.times;
    let (t0, t1) = (times[0], times[n - 1]);
    let mut out = Vec::new();
    for (wi, win) in windows.iter().enumerate() {
        // Integrate over the window's support only: stencils crossing its
        // edges would see the kink of χ′ there.
        let (lo, hi) = match *win {
            Window::Constant => (0, n - 1),
            Window::Bump { a, b } => (
                times.partition_point(|&t| t < a).min(n - 1),
                (times.partition_point(|&t| t <= b).max(1) - 1),
            ),
        };
        let span = &times[lo..=hi];
        let chi: Vec<f64> = span.iter().map(|&t| win.value(t)).collect();
        let dchi: Vec<f64> = span.iter().map(|&t| win.slope(t)).collect();
        let residual = |c: &[f64], g: &[f64]| {
            let boundary = win.value(t1) * c[n - 1] - win.value(t0) * c[0];
            let weak: Vec<f64> = (0..span.len())
                .map(|i| chi[i] * g[lo + i] - dchi[i] * c[lo + i])
                .collect();
            (boundary + quadrature::integrate(span, &weak)).abs()
        };
        for l in 0..test_modes {
            out.push(WeakResidual {
                mode: l,
                window: wi,
                u: residual(&cu[l], &gu[l]),
                w: residual(&cw[l], &gw[l]),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBudget {
    pub t0: f64,
    pub times: Vec<f64>,
    /// `‖u‖² + ‖w‖² − ‖u(t₀)‖² − ‖w(t₀)‖² + 2∫_{t₀}^t (a(u,u) + (f,u) + (g,w) − ⟨s,u⟩)`.
    pub slack: Vec<f64>,
    pub max_abs_slack: f64,
    /// Largest positive slack (the inequality form requires ≤ 0).
    pub max_slack: f64,
}

/// Energy identity along the samples from index `start` on.
pub fn energy_budget(traj: &Trajectory, sys: &GalerkinSystem<'_>, start: usize) -> Result<EnergyBudget> {
    if start >= traj.len() {
        return Err(BidomainError::invalid("t0", "start index outside the trajectory"));
    }
    let m = sys.modes();
    let w_nodes = sys.basis.mass.clone();
    let lam = &sys.basis.eigenvalues;
    let times = traj.times[start..].to_vec();
    let mut storage = Vec::with_capacity(times.len());
    let mut power = Vec::with_capacity(times.len());
    for (y, &t) in traj.states[start..].iter().zip(&times) {
        let (a, b) = y.split_at(m);
        let (u, w) = sys.nodal_fields(y);
        let form: f64 = a.iter().zip(lam).map(|(x, l)| l * x * x).sum();
        let reaction: f64 = u
            .iter()
            .zip(&w)
            .zip(&w_nodes)
            .map(|((&uu, &ww), q)| q * (sys.model.f(uu, ww) * uu + sys.model.g(uu, ww) * ww))
            .sum();
        let source: f64 = sys.forcing.modal(t, m).iter().zip(a).map(|(s, x)| s * x).sum();
        storage.push(a.iter().chain(b).map(|x| x * x).sum::<f64>());
        power.push(form + reaction - source);
    }
    let acc = quadrature::cumulative(&times, &power);
    let slack: Vec<f64> = storage.iter().zip(&acc).map(|(e, p)| e - storage[0] + 2.0 * p).collect();
    let max_abs_slack = slack.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let max_slack = slack.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    Ok(EnergyBudget {
        t0: times[0],
        times,
        slack,
        max_abs_slack,
        max_slack,
    })
}

/// Sample index minimizing `‖u‖_V + ‖f₁(u) u‖_{L¹}`.
pub fn select_t0(traj: &Trajectory, sys: &GalerkinSystem<'_>, norms: &SobolevNorms) -> usize {
    let m = sys.modes();
    let w = &sys.basis.mass;
    let score = |y: &[f64]| {
        let u = sys.basis.reconstruct(&y[..m]);
        let l1: f64 = u.iter().zip(w).map(|(&x, q)| q * (sys.model.f1(x) * x).abs()).sum();
        norms.v_norm_sq(&u).sqrt() + l1
    };
    let mut best = (f64::INFINITY, 0);
    for (i, y) in traj.states.iter().enumerate() {
        let s = score(y);
        if s < best.0 {
            best = (s, i);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
}

/// Energy-identity slack under step refinement of fixed-step ETDRK4.
pub fn energy_identity_order(
    sys: &GalerkinSystem<'_>,
    x0: &ModalState,
    t_end: f64,
    step_counts: &[usize],
) -> Result<RefinementStudy> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for &n in step_counts {
        let tr = integrator::integrate_fixed(sys, &x0.packed(), x0.time, t_end, n)?;
        let budget = energy_budget(&tr, sys, 0)?;
        steps.push((t_end - x0.time) / n as f64);
        errors.push(budget.max_abs_slack);
    }
    let slope = log_log_slope(&steps, &errors);
    Ok(RefinementStudy { steps, errors, slope })
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    linear_fit(&pts).1
}

/// `(intercept, slope)` of a least-squares line.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (pts.first().map_or(0.0, |p| p.1), 0.0);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// `2(λ_f + εk + ε) + 1`: growth rate allowed for the squared difference of
/// two FitzHugh–Nagumo solutions.
pub fn uniqueness_rate_bound(model: &IonicModel) -> Result<f64> {
    let lip = one_sided_lipschitz(model, &Lattice::square(2.0, 0.01))?;
    Ok(2.0 * (lip.lambda_f + model.eps * model.k + model.eps) + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub tol_a: f64,
    pub tol_b: f64,
    pub times: Vec<f64>,
    /// `‖u−v‖²_M + ‖w−z‖²_M` per sample.
    pub difference_norms: Vec<f64>,
    pub gronwall_rate: f64,
    pub rate_bound: f64,
    /// Smallest `C` with `d(t) ≤ C e^{Λt} max(tol)²` at every sample.
    pub envelope_constant: f64,
    /// Admissible `C`: `100 (1 + t_end)² (1 + max|y|)²`.
    pub envelope_limit: f64,
    pub pass: bool,
}

/// Integrates twice from `x0` with tolerances `tol_a` and `tol_b` and fits
/// the growth of the squared difference.
pub fn uniqueness_test(
    sys: &GalerkinSystem<'_>,
    model: &IonicModel,
    x0: &ModalState,
    tol_a: f64,
    tol_b: f64,
    horizon: f64,
    samples: usize,
) -> Result<UniquenessReport> {
    if model.variant != ModelVariant::FitzHughNagumo {
        return Err(BidomainError::UnsupportedModel(format!(
            "uniqueness is only checked for fitzhugh-nagumo, got {}",
            model.variant
        )));
    }
    let rate_bound = uniqueness_rate_bound(model)?;
    let times = uniform_samples(x0.time, x0.time + horizon, samples);
    let ra = sys.integrate(x0, &times, tol_a)?;
    let rb = sys.integrate(x0, &times, tol_b)?;
    let difference_norms: Vec<f64> = ra
        .states
        .iter()
        .zip(&rb.states)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum())
        .collect();
    let y_max = ra
        .states
        .iter()
        .flat_map(|y| y.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let rounding = (64.0 * f64::EPSILON * (1.0 + y_max)).powi(2);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&difference_norms)
        .filter(|(_, &d)| d > 100.0 * rounding)
        .map(|(&t, &d)| (t - x0.time, d.ln()))
        .collect();
    let gronwall_rate = linear_fit(&pts).1;
    let scale = tol_a.max(tol_b).powi(2);
    let envelope_constant = times
        .iter()
        .zip(&difference_norms)
        .map(|(&t, &d)| d * (-gronwall_rate.max(0.0) * (t - x0.time)).exp() / scale)
        .fold(0.0, f64::max);
    let envelope_limit = 100.0 * (1.0 + horizon).powi(2) * (1.0 + y_max).powi(2);
    let pass = gronwall_rate <= rate_bound && envelope_constant <= envelope_limit;
    Ok(UniquenessReport {
        tol_a,
        tol_b,
        times,
        difference_norms,
        gronwall_rate,
        rate_bound,
        envelope_constant,
        envelope_limit,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub orders: Vec<usize>,
    pub solves: Vec<PeriodicSolveReport>,
    /// `‖u_{k_{i+1}} − u_{k_i}‖_{L²(0,T;V)}`.
    pub increments: Vec<f64>,
    /// Set when a sub-solve failed; the vectors hold the partial results.
    pub failure: Option<String>,
}

/// Periodic solutions at increasing Galerkin orders and their Cauchy
/// increments. Every solve uses the same sample times so increments are
/// compared pointwise.
pub fn convergence_study(
    op: &BidomainOperator,
    norms: &SobolevNorms,
    full_basis: &EigenBasis,
    model: &dyn Reaction,
    period: f64,
    components: &[ForcingComponent],
    orders: &[usize],
    opts: &PeriodicOptions,
) -> Result<ConvergenceReport> {
    if orders.len() < 3 || orders.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BidomainError::invalid(
            "convergence.orders",
            "need at least three strictly increasing orders",
        ));
    }
    if *orders.last().unwrap() > full_basis.order() {
        return Err(BidomainError::invalid(
            "convergence.orders",
            format!("largest order exceeds the basis order {}", full_basis.order()),
        ));
    }
    let mut report = ConvergenceReport {
        orders: Vec::new(),
        solves: Vec::new(),
        increments: Vec::new(),
        failure: None,
    };
    let mut previous: Option<Vec<Vec<f64>>> = None;
    for &k in orders {
        let basis = full_basis.truncated(k);
        let outcome = Forcing::new(period, components.to_vec(), op, &basis, norms).and_then(|forcing| {
            let sys = GalerkinSystem::new(&basis, model, &forcing);
            let rep = solve_periodic(&sys, &ModalState::zeros(basis.modes()), opts)?;
            if !rep.converged {
                return Err(BidomainError::Context {
                    context: format!("order {k}"),
                    message: format!("periodic solve stopped at residual {:e}", rep.residual),
                });
            }
            Ok(rep)
        });
        let rep = match outcome {
            Ok(r) => r,
            Err(e) => {
                report.failure = Some(e.within(&format!("convergence study, order {k}")).to_string());
                return Ok(report);
            }
        };
        let m = basis.modes();
        let fields: Vec<Vec<f64>> = rep.trajectory.states.iter().map(|y| basis.reconstruct(&y[..m])).collect();
        if let Some(prev) = &previous {
            let vals: Vec<f64> = fields
                .iter()
                .zip(prev)
                .map(|(a, b)| {
                    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    norms.v_norm_sq(&d)
                })
                .collect();
            report
                .increments
                .push(quadrature::integrate(&rep.trajectory.times, &vals).max(0.0).sqrt());
        }
        previous = Some(fields);
        report.orders.push(k);
        report.solves.push(rep);
    }
    Ok(report)
}

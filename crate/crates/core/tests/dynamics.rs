#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use bidomain::conductivity::{ConductivityField, Tensor2};
use bidomain::dynamics::{modal_rhs, GalerkinSystem, ModalState};
use bidomain::eigenbasis::{compute_eigenbasis, EigenBasis};
use bidomain::forcing::{Forcing, TemporalShape};
use bidomain::grid::build_grid;
use bidomain::integrator::uniform_samples;
use bidomain::ionic::{IonicModel, LinearSurrogate};
use bidomain::norms::SobolevNorms;
use bidomain::operators::BidomainOperator;
use bidomain::periodic::{poincare_map, sample_ball, solve_periodic, Acceleration, PeriodicOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(n: usize, k: usize) -> (BidomainOperator, SobolevNorms, EigenBasis) {
    let g = build_grid(&[1.0], &[n]).unwrap();
    let f = ConductivityField::constant(&g, Tensor2::isotropic(1.0), Tensor2::isotropic(2.0)).unwrap();
    let op = BidomainOperator::new(&g, &f).unwrap();
    let basis = compute_eigenbasis(&op, k).unwrap();
    (op, SobolevNorms::new(&g).unwrap(), basis)
}

/// Periodic solution of `a′ = −λa + c θ(t)` for the three shapes with
/// `ω = 2π/T`.
fn closed_form(shape: &TemporalShape, lam: f64, c: f64, period: f64, t: f64) -> f64 {
    let w = 2.0 * PI / period;
    match shape {
        TemporalShape::Sin => c * (lam * (w * t).sin() - w * (w * t).cos()) / (lam * lam + w * w),
        TemporalShape::Cos => c * (lam * (w * t).cos() + w * (w * t).sin()) / (lam * lam + w * w),
        TemporalShape::Constant => c / lam,
        _ => unreachable!(),
    }
}

#[test]
fn linear_surrogate_matches_closed_form() {
    let (_, norms, basis) = setup(33, 6);
    let period = 0.7;
    let tol = 1e-10;
    let cases = [
        (1, 0.8, TemporalShape::Sin),
        (2, -1.5, TemporalShape::Cos),
        (4, 2.0, TemporalShape::Constant),
    ];
    for (mode, c, shape) in cases {
        let s: Vec<f64> = basis.vector(mode).iter().map(|v| c * v).collect();
        let forcing = Forcing::from_modified(period, vec![(s, shape.clone())], &basis, &norms).unwrap();
        let model = LinearSurrogate::zero();
        let sys = GalerkinSystem::new(&basis, &model, &forcing);
        let opts = PeriodicOptions {
            tol: 1e-12,
            integrator_tol: tol,
            ..PeriodicOptions::default()
        };
        let rep = solve_periodic(&sys, &ModalState::zeros(basis.modes()), &opts).unwrap();
        assert!(rep.converged);
        let lam = basis.eigenvalues[mode];
        for (t, y) in rep.trajectory.times.iter().zip(&rep.trajectory.states) {
            for j in 0..basis.modes() {
                let expect = if j == mode { closed_form(&shape, lam, c, period, *t) } else { 0.0 };
                assert!((y[j] - expect).abs() <= 10.0 * tol * (1.0 + expect.abs()), "{shape:?} mode {j} t {t}: {} vs {expect}", y[j]);
            }
        }
    }
}

#[test]
fn coupled_linear_steady_state() {
    // constant forcing on one mode; the periodic orbit is the 2x2 equilibrium
    let (_, norms, basis) = setup(17, 3);
    let model = LinearSurrogate {
        f_u: 1.0,
        f_w: 1.0,
        g_u: -1.0,
        g_w: 0.5,
    };
    let s: Vec<f64> = basis.vector(2).iter().map(|v| 3.0 * v).collect();
    let forcing = Forcing::from_modified(1.0, vec![(s, TemporalShape::Constant)], &basis, &norms).unwrap();
    let sys = GalerkinSystem::new(&basis, &model, &forcing);
    let rep = solve_periodic(&sys, &ModalState::zeros(basis.modes()), &PeriodicOptions::default()).unwrap();
    let lam = basis.eigenvalues[2];
    // (λ + f_u) a + f_w b = 3, g_u a + g_w b = 0
    let det = (lam + 1.0) * 0.5 + 1.0;
    let a = 3.0 * 0.5 / det;
    let b = -(-1.0) * 3.0 / det;
    let x = &rep.fixed_point;
    assert!((x.alpha[2] - a).abs() < 1e-9 && (x.beta[2] - b).abs() < 1e-9);
    assert!(x.alpha.iter().enumerate().all(|(j, v)| j == 2 || v.abs() < 1e-12));
}

#[test]
fn modal_rhs_matches_nodal_projection() {
    let (_, norms, basis) = setup(25, 5);
    let model = IonicModel::fitzhugh_nagumo(0.1, 1.0, 0.05);
    let forcing = Forcing::zero(3.0, &basis, &norms).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = sample_ball(&mut rng, basis.modes(), 1.0, 2.0, true);
    let x = ModalState::from_packed(&y, 0.0);
    let (da, db) = modal_rhs(&basis, &model, &forcing, &x);
    let u = basis.reconstruct(&x.alpha);
    let w = basis.reconstruct(&x.beta);
    let m = &basis.mass;
    for j in 0..basis.modes() {
        let psi = basis.vector(j);
        let pf: f64 = (0..u.len()).map(|i| m[i] * psi[i] * (u[i] * (u[i] - 0.1) * (u[i] - 1.0) + w[i])).sum();
        let pg: f64 = (0..u.len()).map(|i| m[i] * psi[i] * 0.05 * (1.0 * w[i] - u[i])).sum();
        assert!((da[j] - (-basis.eigenvalues[j] * x.alpha[j] - pf)).abs() < 1e-10 * (1.0 + pf.abs()));
        assert!((db[j] + pg).abs() < 1e-12);
    }
}

#[test]
fn poincare_map_of_decay_is_exponential() {
    let (_, norms, basis) = setup(17, 4);
    let forcing = Forcing::zero(0.5, &basis, &norms).unwrap();
    let model = LinearSurrogate::zero();
    let sys = GalerkinSystem::new(&basis, &model, &forcing);
    let x = ModalState::new(vec![1.0; 5], vec![0.5; 5], 0.0).unwrap();
    let s = poincare_map(&sys, &x, 1e-12, 10).unwrap();
    for j in 0..5 {
        let expect = (-basis.eigenvalues[j] * 0.5).exp();
        assert!((s.alpha[j] - expect).abs() < 1e-10 * (1.0 + expect));
        assert_eq!(s.beta[j], 0.5);
    }
}

#[test]
fn anderson_and_picard_agree() {
    let (op, norms, basis) = setup(33, 8);
    let g = op.grid.clone();
    let model = IonicModel::fitzhugh_nagumo(0.1, 1.0, 0.05);
    let s_i: Vec<f64> = (0..g.len()).map(|i| 0.3 * (PI * g.coords(i)[0]).cos()).collect();
    let s_e: Vec<f64> = s_i.iter().map(|v| -v).collect();
    let comps = vec![bidomain::forcing::ForcingComponent {
        s_i,
        s_e,
        shape: TemporalShape::Sin,
    }];
    let forcing = Forcing::new(2.0, comps, &op, &basis, &norms).unwrap();
    let sys = GalerkinSystem::new(&basis, &model, &forcing);
    let x0 = ModalState::zeros(basis.modes());
    let fast = solve_periodic(&sys, &x0, &PeriodicOptions::default()).unwrap();
    let slow = solve_periodic(
        &sys,
        &x0,
        &PeriodicOptions {
            accel: Acceleration::None,
            max_iter: 2000,
            ..PeriodicOptions::default()
        },
    )
    .unwrap();
    assert!(fast.converged && slow.converged);
    assert!(fast.iterations < slow.iterations);
    for (a, b) in fast.fixed_point.packed().iter().zip(slow.fixed_point.packed()) {
        assert!((a - b).abs() < 1e-7);
    }
    let times = uniform_samples(0.0, 2.0, 4);
    let again = sys.integrate(&fast.fixed_point, &times, 1e-11).unwrap();
    for (a, b) in again.last().iter().zip(fast.fixed_point.packed()) {
        assert!((a - b).abs() < 1e-7);
    }
}

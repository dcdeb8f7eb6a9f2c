use std::f64::consts::PI;

use bidomain::conductivity::{ConductivityField, Tensor2};
use bidomain::eigenbasis::{coercivity_on_span, compute_eigenbasis, estimate_coercivity};
use bidomain::grid::build_grid;
use bidomain::norms::SobolevNorms;
use bidomain::operators::{mean_zero_project, BidomainOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn op_1d(n: usize, si: f64, se: f64) -> BidomainOperator {
    let g = build_grid(&[1.0], &[n]).unwrap();
    let f = ConductivityField::constant(&g, Tensor2::isotropic(si), Tensor2::isotropic(se)).unwrap();
    BidomainOperator::new(&g, &f).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn equal_conductivity_reduces_to_half_laplacian_2d() {
    let g = build_grid(&[1.0, 0.5], &[12, 9]).unwrap();
    let s = Tensor2::symmetric(1.5, 0.0, 0.7);
    let f = ConductivityField::constant(&g, s, s).unwrap();
    let op = BidomainOperator::new(&g, &f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let v: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = op.apply(&v);
        let rhs: Vec<f64> = op.ai.apply(&mean_zero_project(&v, &g)).iter().map(|x| 0.5 * x).collect();
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(max_abs(&diff) <= 1e-10 * max_abs(&rhs).max(1.0));
    }
}

#[test]
fn kernel_is_the_constants() {
    let op = op_1d(33, 1.0, 2.0);
    let basis = compute_eigenbasis(&op, 4).unwrap();
    assert!(basis.eigenvalues[0].abs() <= 1e-8);
    let v0 = basis.vector(0);
    let c = v0[0];
    assert!(v0.iter().all(|x| (x - c).abs() < 1e-10));
    assert!(basis.eigenvalues[1] > 1.0);
}

#[test]
fn eigenvalues_converge_to_harmonic_mean_laplacian() {
    // continuous Neumann problem: λ_j = σ_iσ_e/(σ_i+σ_e) (jπ)²
    let exact = |j: usize| 2.0 / 3.0 * (j as f64 * PI).powi(2);
    let grids = [17, 33, 65, 129];
    let errors: Vec<Vec<f64>> = grids
        .iter()
        .map(|&n| {
            let b = compute_eigenbasis(&op_1d(n, 1.0, 2.0), 5).unwrap();
            (1..=5).map(|j| (b.eigenvalues[j] - exact(j)).abs()).collect()
        })
        .collect();
    for j in 0..5 {
        for w in errors.windows(2) {
            let order = (w[0][j] / w[1][j]).log2();
            assert!(order >= 1.8, "mode {} order {order}", j + 1);
        }
    }
}

#[test]
fn basis_quality_2d_anisotropic() {
    let g = build_grid(&[1.0, 1.0], &[10, 10]).unwrap();
    let si: Vec<Tensor2> = (0..g.len())
        .map(|i| {
            let c = g.coords(i);
            let off = if g.is_boundary(i) { 0.0 } else { 0.2 * (PI * c[0]).sin() };
            Tensor2::symmetric(1.0 + c[0], off, 0.8)
        })
        .collect();
    let se = vec![Tensor2::symmetric(2.0, 0.0, 1.0); g.len()];
    let f = ConductivityField::new(&g, si, se, None).unwrap();
    let op = BidomainOperator::new(&g, &f).unwrap();
    let b = compute_eigenbasis(&op, 20).unwrap();
    assert!(b.orthonormality_defect() <= 1e-8);
    for (r, l) in b.residuals(&op).iter().zip(&b.eigenvalues) {
        assert!(*r <= 1e-7 * (1.0 + l));
    }
    assert!(b.eigenvalues.windows(2).all(|w| w[0] <= w[1] + 1e-12));
}

#[test]
fn coercivity_estimates_bracket_the_span_value() {
    let op = op_1d(33, 1.0, 2.0);
    let g = op.grid.clone();
    let norms = SobolevNorms::new(&g).unwrap();
    let basis = compute_eigenbasis(&op, 12).unwrap();
    let span = coercivity_on_span(&basis, &norms);
    // 1D, equal shape of σ: a(u,u) = (2/3)‖∇u‖² up to the conductivity averaging
    assert!((span - 2.0 / 3.0).abs() < 1e-6, "{span}");
    let est = estimate_coercivity(&op, &norms, 50, 11).unwrap();
    assert!(est.alpha > 0.0 && est.alpha_max >= span - 1e-9);
    assert!(est.continuity > 0.0);
    assert_eq!(estimate_coercivity(&op, &norms, 50, 11).unwrap(), est);
}

#[test]
fn modified_source_conserves_and_recovers() {
    let op = op_1d(41, 1.0, 3.0);
    let g = op.grid.clone();
    let s_i: Vec<f64> = (0..g.len()).map(|i| (2.0 * PI * g.coords(i)[0]).cos()).collect();
    let s_e: Vec<f64> = s_i.iter().map(|v| -v).collect();
    let ms = op.modified_source(&s_i, &s_e);
    assert!(ms.dropped_mean.abs() < 1e-12);
    // s_e = −s_i makes (A_i+A_e)⁻¹(s_i+s_e) vanish, so s = s_i
    assert!(ms.s.iter().zip(&s_i).all(|(a, b)| (a - b).abs() < 1e-12));
    let uneven: Vec<f64> = vec![1.0; g.len()];
    let ms = op.modified_source(&uneven, &vec![0.0; g.len()]);
    assert!((ms.dropped_mean - 1.0).abs() < 1e-12);
}

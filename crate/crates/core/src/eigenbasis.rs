//! Galerkin basis: `M`-orthonormal eigenpairs of the bidomain form, and
//! empirical coercivity/continuity constants.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BidomainError, Result};
use crate::norms::SobolevNorms;
use crate::operators::BidomainOperator;

/// Largest grid handled by the dense generalized eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 4096;

/// Ascending eigenvalues `λ_0 ≤ … ≤ λ_k` with `M`-orthonormal eigenvectors
/// stored column-wise (`n x (k+1)`).
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub mass: Vec<f64>,
}

impl EigenBasis {
    pub fn order(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j).iter().copied().collect()
    }

    /// Nodal field `Σ_j c_j ψ_j`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes()];
        self.reconstruct_into(coeffs, &mut out);
        out
    }

    pub fn reconstruct_into(&self, coeffs: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.vectors.column(j).iter()) {
                *o += c * p;
            }
        }
    }

    /// Coefficients `(v, ψ_j)_M`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.modes()];
        self.project_into(v, &mut out);
        out
    }

    pub fn project_into(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self
                .vectors
                .column(j)
                .iter()
                .zip(v.iter().zip(&self.mass))
                .map(|(p, (x, w))| p * x * w)
                .sum();
        }
    }

    /// Truncates to the first `k + 1` modes.
    pub fn truncated(&self, k: usize) -> EigenBasis {
        let m = (k + 1).min(self.modes());
        EigenBasis {
            eigenvalues: self.eigenvalues[..m].to_vec(),
            vectors: self.vectors.columns(0, m).into_owned(),
            mass: self.mass.clone(),
        }
    }

    /// `max |ΨᵀMΨ − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.modes();
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in a..m {
                let v: f64 = self
                    .vectors
                    .column(a)
                    .iter()
                    .zip(self.vectors.column(b).iter())
                    .zip(&self.mass)
                    .map(|((x, y), w)| x * y * w)
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Per-mode residual `‖Sψ_j − λ_j M ψ_j‖_{M⁻¹}`, i.e. the nodal residual
    /// of `A ψ_j = λ_j ψ_j` in the `M` norm.
    pub fn residuals(&self, op: &BidomainOperator) -> Vec<f64> {
        (0..self.modes())
            .map(|j| {
                let psi = self.vector(j);
                let apsi = op.apply(&psi);
                let r: Vec<f64> = apsi
                    .iter()
                    .zip(&psi)
                    .map(|(a, p)| a - self.eigenvalues[j] * p)
                    .collect();
                op.grid.norm_sq(&r).sqrt()
            })
            .collect()
    }
}

/// Computes the first `k + 1` eigenpairs of `a(ψ, v) = λ (ψ, v)_M`.
///
/// Uses the symmetric similarity `M^{-1/2} B M^{-1/2}` of the dense form
/// matrix `B`; `M` is diagonal so the transformation is exact.
pub fn compute_eigenbasis(op: &BidomainOperator, k: usize) -> Result<EigenBasis> {
    let n = op.len();
    if k + 1 > n {
        return Err(BidomainError::invalid(
            "solver.modes",
            format!("k + 1 = {} exceeds the {n} grid nodes", k + 1),
        ));
    }
    if n > DENSE_EIGEN_LIMIT {
        return Err(BidomainError::GridTooLarge {
            nodes: n,
            limit: DENSE_EIGEN_LIMIT,
        });
    }
    let mass = op.mass().to_vec();
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut c = op.dense_form();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let m = k + 1;
    let mut vectors = DMatrix::zeros(n, m);
    let mut eigenvalues = Vec::with_capacity(m);
    for (col, &idx) in order.iter().take(m).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        let mut v: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)] * inv_sqrt[i]).collect();
        let peak = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * peak) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        vectors.column_mut(col).copy_from_slice(&v);
    }

    let basis = EigenBasis {
        eigenvalues,
        vectors,
        mass,
    };
    let residuals = basis.residuals(op);
    if let Some((mode, &worst)) = residuals
        .iter()
        .enumerate()
        .find(|(j, r)| **r > 1e-7 * (1.0 + basis.eigenvalues[*j].abs()))
    {
        return Err(BidomainError::EigenNonConvergence {
            mode,
            worst_residual: worst,
        });
    }
    Ok(basis)
}

/// Probe-based coercivity (`α‖u‖²_V ≤ a(u,u) + α‖u‖²_H`) and continuity
/// (`|a(u,v)| ≤ M‖u‖_V‖v‖_V`) constants.
///
/// Both are bounds over the probe set only. `alpha_max` is the largest
/// coercivity constant compatible with every probe; `alpha` is that value
/// capped at `continuity` (any smaller constant also satisfies the
/// inequality).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityEstimate {
    pub alpha: f64,
    pub alpha_max: f64,
    pub continuity: f64,
    pub probes: usize,
}

/// Samples `n_probes` random fields (white noise and smooth random Fourier
/// sums in equal parts) plus the constant field.
pub fn estimate_coercivity(
    op: &BidomainOperator,
    norms: &SobolevNorms,
    n_probes: usize,
    seed: u64,
) -> Result<CoercivityEstimate> {
    if n_probes < 10 {
        return Err(BidomainError::invalid("n_probes", "need at least 10 probes"));
    }
    let grid = &op.grid;
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes: Vec<Vec<f64>> = Vec::with_capacity(n_probes + 1);
    probes.push(vec![1.0; n]);
    for p in 0..n_probes {
        let v: Vec<f64> = if p % 2 == 0 {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            let modes = 1 + p % 6;
            let coef: Vec<(f64, f64, f64)> = (0..modes)
                .map(|_| {
                    (
                        rng.random_range(-1.0..1.0),
                        rng.random_range(1.0..6.0f64).floor(),
                        rng.random_range(0.0..4.0f64).floor(),
                    )
                })
                .collect();
            (0..n)
                .map(|node| {
                    let c = grid.coords(node);
                    coef.iter()
                        .map(|(a, kx, ky)| {
                            a * (kx * std::f64::consts::PI * c[0] / grid.extents()[0]).cos()
                                * if grid.dimension() == 2 {
                                    (ky * std::f64::consts::PI * c[1] / grid.extents()[1]).cos()
                                } else {
                                    1.0
                                }
                        })
                        .sum()
                })
                .collect()
        };
        probes.push(v);
    }

    let applied: Vec<Vec<f64>> = probes.iter().map(|p| op.form_apply(p)).collect();
    let vnorm: Vec<f64> = probes.iter().map(|p| norms.v_norm_sq(p).sqrt()).collect();

    let mut alpha_max = f64::INFINITY;
    for (p, ap) in probes.iter().zip(&applied) {
        let grad = norms.grad_norm_sq(p);
        let vv = norms.v_norm_sq(p);
        if grad <= 1e-14 * vv {
            // kernel direction: the inequality holds for every α
            continue;
        }
        let a: f64 = p.iter().zip(ap).map(|(x, y)| x * y).sum();
        alpha_max = alpha_max.min(a / grad);
    }
    let mut continuity: f64 = 0.0;
    for (i, ap) in applied.iter().enumerate() {
        for (j, q) in probes.iter().enumerate() {
            let a: f64 = q.iter().zip(ap).map(|(x, y)| x * y).sum();
            let denom = vnorm[i] * vnorm[j];
            if denom > 0.0 {
                continuity = continuity.max(a.abs() / denom);
            }
        }
    }
    Ok(CoercivityEstimate {
        alpha: alpha_max.min(continuity),
        alpha_max,
        continuity,
        probes: probes.len(),
    })
}

/// Exact coercivity constant on the Galerkin span:
/// `min a(u,u) / ‖∇_h u‖²` over `u ∈ span{ψ_1..ψ_k}`.
pub fn coercivity_on_span(basis: &EigenBasis, norms: &SobolevNorms) -> f64 {
    let m = basis.modes();
    if m < 2 {
        return f64::INFINITY;
    }
    let cols: Vec<Vec<f64>> = (1..m).map(|j| basis.vector(j)).collect();
    let g_cols: Vec<Vec<f64>> = cols.iter().map(|c| norms.laplacian.stiffness.mul_vec(c)).collect();
    let d = m - 1;
    let mut gram = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let v: f64 = cols[a].iter().zip(&g_cols[b]).map(|(x, y)| x * y).sum();
            gram[(a, b)] = v / (basis.eigenvalues[a + 1] * basis.eigenvalues[b + 1]).sqrt();
        }
    }
    let g2 = gram.clone().transpose();
    gram = (gram + g2) * 0.5;
    let top = SymmetricEigen::new(gram).eigenvalues.max();
    1.0 / top
}

//! Discrete elliptic operators `−div(σ∇·)` with zero-flux closure, the mean
//! projection and the composed bidomain operator `A_i (A_i + A_e)⁻¹ A_e P_av`.
//!
//! Every operator is stored through its stiffness matrix `S` (the discrete
//! bilinear form) and the lumped mass `M`; the operator acting on nodal
//! values is `M⁻¹ S`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::conductivity::{validate_tensors, ConductivityField, Tensor2};
use crate::error::{BidomainError, Result};
use crate::grid::Grid;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Intra,
    Extra,
    Sum,
    Bidomain,
    /// Unit-conductivity Laplacian used for the discrete `H¹` norm.
    Laplacian,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    pub kind: OperatorKind,
}

impl DiscreteOperator {
    /// Applies `M⁻¹ S`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.stiffness.mul_vec(v);
        out.iter_mut().zip(&self.mass).for_each(|(o, m)| *o /= m);
        out
    }

    /// `uᵀ S v`, the bilinear form `∫ σ∇u·∇v`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.bilinear(u, v)
    }
}

/// Assembles the stiffness of `u ↦ −div(σ∇u)` with homogeneous Neumann closure.
///
/// Cell-based: on every cell the tensor is the average of its corner
/// tensors, the diagonal terms use the edge differences of the cell (each
/// edge carrying half of the cell) and the cross term uses the cell-averaged
/// gradient. With the trapezoid mass this is the standard ghost-node finite
/// difference stencil for axis-aligned conductivities.
pub fn assemble_elliptic(grid: &Grid, sigma: &[Tensor2], kind: OperatorKind) -> Result<DiscreteOperator> {
    if sigma.len() != grid.len() {
        return Err(BidomainError::DimensionMismatch {
            expected: grid.len(),
            got: sigma.len(),
        });
    }
    validate_tensors(grid, sigma, f64::MIN_POSITIVE, f64::INFINITY)?;

    let n = grid.len();
    let mut trip = Vec::new();
    match grid.dimension() {
        1 => {
            let h = grid.spacing()[0];
            for i in 0..n - 1 {
                let s = 0.5 * (sigma[i].s11 + sigma[i + 1].s11) / h;
                trip.extend([(i, i, s), (i + 1, i + 1, s), (i, i + 1, -s), (i + 1, i, -s)]);
            }
        }
        _ => {
            let (nx, ny) = (grid.counts()[0], grid.counts()[1]);
            let (hx, hy) = (grid.spacing()[0], grid.spacing()[1]);
            let area = hx * hy;
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let nodes = [
                        grid.index(i, j),
                        grid.index(i + 1, j),
                        grid.index(i, j + 1),
                        grid.index(i + 1, j + 1),
                    ];
                    let mut s11 = 0.0;
                    let mut s12 = 0.0;
                    let mut s22 = 0.0;
                    for &nd in &nodes {
                        s11 += 0.25 * sigma[nd].s11;
                        s12 += 0.25 * 0.5 * (sigma[nd].s12 + sigma[nd].s21);
                        s22 += 0.25 * sigma[nd].s22;
                    }
                    let gb = [-1.0 / hx, 1.0 / hx, 0.0, 0.0];
                    let gt = [0.0, 0.0, -1.0 / hx, 1.0 / hx];
                    let gl = [-1.0 / hy, 0.0, 1.0 / hy, 0.0];
                    let gr = [0.0, -1.0 / hy, 0.0, 1.0 / hy];
                    let gx: Vec<f64> = (0..4).map(|a| 0.5 * (gb[a] + gt[a])).collect();
                    let gy: Vec<f64> = (0..4).map(|a| 0.5 * (gl[a] + gr[a])).collect();
                    for a in 0..4 {
                        for b in 0..4 {
                            let v = area
                                * (0.5 * s11 * (gb[a] * gb[b] + gt[a] * gt[b])
                                    + 0.5 * s22 * (gl[a] * gl[b] + gr[a] * gr[b])
                                    + s12 * (gx[a] * gy[b] + gy[a] * gx[b]));
                            if v != 0.0 {
                                trip.push((nodes[a], nodes[b], v));
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(DiscreteOperator {
        stiffness: CsrMatrix::from_triplets(n, trip),
        mass: grid.quad_weights().to_vec(),
        kind,
    })
}

/// `P_av v = v − |Ω|⁻¹ ∫ v`.
pub fn mean_zero_project(v: &[f64], grid: &Grid) -> Vec<f64> {
    let mean = grid.integrate(v) / grid.measure();
    v.iter().map(|x| x - mean).collect()
}

/// Solver for `(S_i + S_e) x = b` on the mean-zero complement.
///
/// The constant kernel is deflated by the rank-one term `c (M1)(M1)ᵀ`; for
/// right-hand sides with zero sum the solution of the deflated system is the
/// unique solution with `1ᵀ M x = 0`.
#[derive(Debug, Clone)]
pub struct MeanZeroSolver {
    chol: Cholesky<f64, Dyn>,
}

impl MeanZeroSolver {
    pub fn new(stiffness: &CsrMatrix, mass: &[f64], measure: f64) -> Result<Self> {
        let n = stiffness.nrows();
        let mut k = stiffness.to_dense();
        let mean_diag = k.diagonal().iter().sum::<f64>() / n as f64;
        let c = mean_diag * n as f64 / (measure * measure);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] += c * mass[i] * mass[j];
            }
        }
        let chol = Cholesky::new(k).ok_or(BidomainError::Factorization {
            what: "deflated A_i + A_e",
        })?;
        Ok(MeanZeroSolver { chol })
    }

    /// Solves with a right-hand side whose entries sum to zero.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.chol.solve(&b).as_slice().to_vec()
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }
}

/// The composed bidomain operator together with the cached factorization of
/// `A_i + A_e`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BidomainOperator {
    pub grid: Grid,
    pub ai: DiscreteOperator,
    pub ae: DiscreteOperator,
    pub sum: DiscreteOperator,
    sum_solver: MeanZeroSolver,
}

/// Modified source `s` together with the mean of `s_i + s_e` removed before
/// the solve (zero when the currents are conserved).
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedSource {
    pub s: Vec<f64>,
    pub dropped_mean: f64,
}

impl BidomainOperator {
    pub fn new(grid: &Grid, field: &ConductivityField) -> Result<Self> {
        field.validate(grid)?;
        let ai = assemble_elliptic(grid, &field.sigma_i, OperatorKind::Intra)?;
        let ae = assemble_elliptic(grid, &field.sigma_e, OperatorKind::Extra)?;
        let sum = DiscreteOperator {
            stiffness: ai.stiffness.add(&ae.stiffness),
            mass: grid.quad_weights().to_vec(),
            kind: OperatorKind::Sum,
        };
        let sum_solver = MeanZeroSolver::new(&sum.stiffness, &sum.mass, grid.measure())?;
        Ok(BidomainOperator {
            grid: grid.clone(),
            ai,
            ae,
            sum,
            sum_solver,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        self.grid.quad_weights()
    }

    /// Stiffness-level product `S_i (S_i + S_e)⁺ S_e v`; constants are annihilated.
    pub fn form_apply(&self, v: &[f64]) -> Vec<f64> {
        let t = self.ae.stiffness.mul_vec(v);
        let x = self.sum_solver.solve(&t);
        self.ai.stiffness.mul_vec(&x)
    }

    /// `A v = M⁻¹ S_i (S_i + S_e)⁺ S_e P_av v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.form_apply(v);
        out.iter_mut().zip(self.mass()).for_each(|(o, m)| *o /= m);
        out
    }

    /// Bidomain bilinear form `a(u, v) = uᵀ M A v`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(self.form_apply(v)).map(|(a, b)| a * b).sum()
    }

    /// Dense symmetric matrix of the bidomain form, `S_i − S_i (S_i+S_e)⁺ S_i`.
    pub fn dense_form(&self) -> DMatrix<f64> {
        let si = self.ai.stiffness.to_dense();
        let x = self.sum_solver.solve_matrix(&si);
        let mut b = &si - &si * x;
        let bt = b.transpose();
        b += bt;
        b *= 0.5;
        b
    }

    /// `(A_i + A_e)⁻¹ y` on mean-zero `y`; a non-zero mean is removed first
    /// and returned alongside.
    pub fn sum_inverse(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mean = self.grid.integrate(y) / self.grid.measure();
        let rhs: Vec<f64> = y
            .iter()
            .zip(self.mass())
            .map(|(v, m)| (v - mean) * m)
            .collect();
        (self.sum_solver.solve(&rhs), mean)
    }

    /// `s = s_i − A_i (A_i + A_e)⁻¹ (s_i + s_e)`.
    pub fn modified_source(&self, s_i: &[f64], s_e: &[f64]) -> ModifiedSource {
        let total: Vec<f64> = s_i.iter().zip(s_e).map(|(a, b)| a + b).collect();
        let (x, dropped_mean) = self.sum_inverse(&total);
        let corr = self.ai.apply(&x);
        ModifiedSource {
            s: s_i.iter().zip(corr).map(|(a, c)| a - c).collect(),
            dropped_mean,
        }
    }

    /// Recovers `(u_i, u_e)` from the transmembrane potential:
    /// `u_e = (A_i + A_e)⁻¹((s_i + s_e) − A_i P_av u)`, `u_i = u + u_e`.
    pub fn recover_potentials(&self, u: &[f64], s_i: &[f64], s_e: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let aiu = self.ai.apply(u);
        let rhs: Vec<f64> = s_i
            .iter()
            .zip(s_e)
            .zip(aiu)
            .map(|((a, b), c)| a + b - c)
            .collect();
        let (ue, _) = self.sum_inverse(&rhs);
        let ui = u.iter().zip(&ue).map(|(a, b)| a + b).collect();
        (ui, ue)
    }
}

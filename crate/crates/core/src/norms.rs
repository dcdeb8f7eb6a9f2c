//! Discrete `H¹`, `H¹`-dual and `L⁴` norms on a grid.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::conductivity::Tensor2;
use crate::error::{BidomainError, Result};
use crate::grid::Grid;
use crate::operators::{assemble_elliptic, DiscreteOperator, OperatorKind};

/// `‖u‖²_V = ‖u‖²_M + ‖∇_h u‖²_M` where the gradient part is the
/// unit-conductivity stiffness `G`; the dual norm is realised through the
/// Riesz map `(M + G)⁻¹`.
#[derive(Debug, Clone)]
pub struct SobolevNorms {
    pub grid: Grid,
    pub laplacian: DiscreteOperator,
    riesz: Cholesky<f64, Dyn>,
}

impl SobolevNorms {
    pub fn new(grid: &Grid) -> Result<Self> {
        let laplacian = assemble_elliptic(grid, &vec![Tensor2::isotropic(1.0); grid.len()], OperatorKind::Laplacian)?;
        let mut dense = laplacian.stiffness.to_dense();
        for (i, w) in grid.quad_weights().iter().enumerate() {
            dense[(i, i)] += w;
        }
        let riesz = Cholesky::new(dense).ok_or(BidomainError::Factorization { what: "M + G" })?;
        Ok(SobolevNorms {
            grid: grid.clone(),
            laplacian,
            riesz,
        })
    }

    pub fn grad_norm_sq(&self, u: &[f64]) -> f64 {
        self.laplacian.form(u, u)
    }

    pub fn v_norm_sq(&self, u: &[f64]) -> f64 {
        self.grid.norm_sq(u) + self.grad_norm_sq(u)
    }

    /// `‖s‖²_{V'} = (Ms)ᵀ (M + G)⁻¹ (Ms)`.
    pub fn dual_norm_sq(&self, s: &[f64]) -> f64 {
        self.dual_inner(s, s)
    }

    pub fn dual_inner(&self, s: &[f64], t: &[f64]) -> f64 {
        let ms: Vec<f64> = s.iter().zip(self.grid.quad_weights()).map(|(a, w)| a * w).collect();
        let mt = DVector::from_iterator(
            t.len(),
            t.iter().zip(self.grid.quad_weights()).map(|(a, w)| a * w),
        );
        let x = self.riesz.solve(&mt);
        ms.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    /// `‖u‖⁴_{L⁴} = Σ w_i u_i⁴`.
    pub fn l4_pow4(&self, u: &[f64]) -> f64 {
        self.grid
            .quad_weights()
            .iter()
            .zip(u)
            .map(|(w, x)| w * x.powi(4))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn dual_norm_is_bounded_by_l2() {
        let g = build_grid(&[1.0], &[21]).unwrap();
        let n = SobolevNorms::new(&g).unwrap();
        let s: Vec<f64> = (0..21).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let d = n.dual_norm_sq(&s);
        assert!(d > 0.0 && d <= g.norm_sq(&s) * (1.0 + 1e-12));
        // constants: (M+G)⁻¹ M 1 = 1, so ‖1‖²_{V'} = |Ω|
        let one = vec![1.0; 21];
        assert!((n.dual_norm_sq(&one) - 1.0).abs() < 1e-10);
        assert!((n.v_norm_sq(&one) - 1.0).abs() < 1e-12);
    }
}

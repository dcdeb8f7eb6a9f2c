//! Uniform tensor-product grids with trapezoid quadrature.

use crate::error::{BidomainError, Result};

/// Tensor-product node set over a rectangle `[0, L_x] (x [0, L_y])`.
///
/// Nodes are numbered with the x index running fastest. Quadrature weights
/// follow the trapezoid rule: boundary nodes are weighted by one half per
/// axis on which they sit at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    extents: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn dimension(&self) -> usize {
        self.counts.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Domain measure `|Ω|`.
    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.counts[0] + i
    }

    /// Per-axis integer coordinates of a node.
    pub fn multi_index(&self, node: usize) -> (usize, usize) {
        let nx = self.counts[0];
        (node % nx, node / nx)
    }

    /// Physical coordinates of a node (second entry is 0 in 1D).
    pub fn coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.multi_index(node);
        let x = i as f64 * self.spacing[0];
        let y = if self.dimension() == 2 {
            j as f64 * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    /// Whether the node lies on the boundary of the rectangle.
    pub fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = self.multi_index(node);
        let on_x = i == 0 || i + 1 == self.counts[0];
        if self.dimension() == 1 {
            on_x
        } else {
            on_x || j == 0 || j + 1 == self.counts[1]
        }
    }

    /// Discrete `L²` inner product `Σ w_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Quadrature of a nodal field.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.weights.iter().zip(u).map(|(w, a)| w * a).sum()
    }

    pub fn norm_sq(&self, u: &[f64]) -> f64 {
        self.inner(u, u)
    }
}

/// Builds a 1D or 2D grid. Each axis needs at least three nodes so that the
/// second-order stencil has an interior.
pub fn build_grid(extents: &[f64], counts: &[usize]) -> Result<Grid> {
    let dim = counts.len();
    if !(1..=2).contains(&dim) {
        return Err(BidomainError::InvalidGrid(format!(
            "dimension must be 1 or 2, got {dim}"
        )));
    }
    if extents.len() != dim {
        return Err(BidomainError::InvalidGrid(format!(
            "{} extents given for a {dim}D grid",
            extents.len()
        )));
    }
    for (axis, (&l, &c)) in extents.iter().zip(counts).enumerate() {
        if c < 3 {
            return Err(BidomainError::InvalidGrid(format!(
                "axis {axis} has {c} nodes; at least 3 are required"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(BidomainError::InvalidGrid(format!(
                "axis {axis} has non-positive extent {l}"
            )));
        }
    }

    let spacing: Vec<f64> = extents
        .iter()
        .zip(counts)
        .map(|(&l, &c)| l / (c - 1) as f64)
        .collect();
    let axis_weights: Vec<Vec<f64>> = spacing
        .iter()
        .zip(counts)
        .map(|(&h, &c)| {
            (0..c)
                .map(|i| if i == 0 || i == c - 1 { 0.5 * h } else { h })
                .collect()
        })
        .collect();

    let weights = if dim == 1 {
        axis_weights[0].clone()
    } else {
        let mut w = Vec::with_capacity(counts[0] * counts[1]);
        for wy in &axis_weights[1] {
            for wx in &axis_weights[0] {
                w.push(wx * wy);
            }
        }
        w
    };

    Ok(Grid {
        extents: extents.to_vec(),
        counts: counts.to_vec(),
        spacing,
        weights,
    })
}

//! Per-node conductivity tensors `σ_i`, `σ_e` and their admissibility checks.

use std::path::Path;

use crate::error::{BidomainError, Result};
use crate::grid::Grid;

/// A 2x2 conductivity tensor. In 1D only `s11` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub s11: f64,
    pub s12: f64,
    pub s21: f64,
    pub s22: f64,
}

impl Tensor2 {
    pub fn isotropic(s: f64) -> Self {
        Tensor2 {
            s11: s,
            s12: 0.0,
            s21: 0.0,
            s22: s,
        }
    }

    pub fn symmetric(s11: f64, s12: f64, s22: f64) -> Self {
        Tensor2 {
            s11,
            s12,
            s21: s12,
            s22,
        }
    }

    /// Closed-form eigenvalues `(lo, hi)` of the symmetric part.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let off = 0.5 * (self.s12 + self.s21);
        let mean = 0.5 * (self.s11 + self.s22);
        let rad = (0.25 * (self.s11 - self.s22).powi(2) + off * off).sqrt();
        (mean - rad, mean + rad)
    }

    fn scaled(&self, c: f64) -> Self {
        Tensor2 {
            s11: c * self.s11,
            s12: c * self.s12,
            s21: c * self.s21,
            s22: c * self.s22,
        }
    }
}

/// Intra- and extracellular conductivity fields on a grid together with the
/// uniform ellipticity bounds `σ̲ ≤ eig(σ) ≤ σ̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub sigma_i: Vec<Tensor2>,
    pub sigma_e: Vec<Tensor2>,
    pub ellipticity_lo: f64,
    pub ellipticity_hi: f64,
}

impl ConductivityField {
    /// Builds a field and checks symmetry, ellipticity and the boundary
    /// alignment condition. When `bounds` is `None` the tightest bounds
    /// covering both fields are used.
    pub fn new(
        grid: &Grid,
        sigma_i: Vec<Tensor2>,
        sigma_e: Vec<Tensor2>,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        for field in [&sigma_i, &sigma_e] {
            if field.len() != grid.len() {
                return Err(BidomainError::DimensionMismatch {
                    expected: grid.len(),
                    got: field.len(),
                });
            }
        }
        let (lo, hi) = match bounds {
            Some(b) => b,
            None => sigma_i
                .iter()
                .chain(&sigma_e)
                .map(|t| effective(grid, t).eigenvalues())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
        };
        let field = ConductivityField {
            sigma_i,
            sigma_e,
            ellipticity_lo: lo,
            ellipticity_hi: hi,
        };
        field.validate(grid)?;
        Ok(field)
    }

    pub fn constant(grid: &Grid, sigma_i: Tensor2, sigma_e: Tensor2) -> Result<Self> {
        Self::new(
            grid,
            vec![sigma_i; grid.len()],
            vec![sigma_e; grid.len()],
            None,
        )
    }

    /// Same field with both tensors multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        ConductivityField {
            sigma_i: self.sigma_i.iter().map(|t| t.scaled(c)).collect(),
            sigma_e: self.sigma_e.iter().map(|t| t.scaled(c)).collect(),
            ellipticity_lo: self.ellipticity_lo * c,
            ellipticity_hi: self.ellipticity_hi * c,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        for field in [&self.sigma_i, &self.sigma_e] {
            validate_tensors(
                grid,
                field,
                self.ellipticity_lo.max(f64::MIN_POSITIVE),
                self.ellipticity_hi,
            )?;
        }
        if !(self.ellipticity_lo > 0.0 && self.ellipticity_lo <= self.ellipticity_hi) {
            return Err(BidomainError::invalid(
                "conductivity.ellipticity",
                format!(
                    "need 0 < lo <= hi, got lo = {}, hi = {}",
                    self.ellipticity_lo, self.ellipticity_hi
                ),
            ));
        }
        Ok(())
    }
}

/// The tensor as seen by the grid: in 1D only `s11` is meaningful.
fn effective(grid: &Grid, t: &Tensor2) -> Tensor2 {
    if grid.dimension() == 1 {
        Tensor2::isotropic(t.s11)
    } else {
        *t
    }
}

/// Checks one tensor field against symmetry, `[lo, hi]` ellipticity and the
/// axis-alignment requirement at boundary nodes.
pub fn validate_tensors(grid: &Grid, field: &[Tensor2], lo: f64, hi: f64) -> Result<()> {
    let slack = 1e-12 * hi.abs().max(1.0);
    for (node, raw) in field.iter().enumerate() {
        let t = effective(grid, raw);
        let sym_tol = 1e-12 * (t.s11.abs() + t.s22.abs()).max(1.0);
        if (t.s12 - t.s21).abs() > sym_tol || !t.s12.is_finite() || !t.s21.is_finite() {
            return Err(BidomainError::NonSymmetricTensor {
                node,
                s12: t.s12,
                s21: t.s21,
            });
        }
        let (a, b) = t.eigenvalues();
        if !(a.is_finite() && b.is_finite()) || a < lo - slack || b > hi + slack || a <= 0.0 {
            return Err(BidomainError::EllipticityViolation {
                node,
                lo: a,
                hi: b,
                bound_lo: lo,
                bound_hi: hi,
            });
        }
        if grid.dimension() == 2 && grid.is_boundary(node) && t.s12 != 0.0 {
            return Err(BidomainError::BoundaryTensorNotAxisAligned { node, s12: t.s12 });
        }
    }
    Ok(())
}

/// Reads a tensor field from CSV with columns `x[,y],s11[,s12,s22]`.
///
/// Rows must follow the grid node order; the coordinates are checked against
/// the grid to `1e-9` relative to the spacing. A header row is skipped if its
/// first field is not numeric.
pub fn load_tensor_csv(grid: &Grid, path: &Path) -> Result<Vec<Tensor2>> {
    let text = std::fs::read_to_string(path)?;
    let dim = grid.dimension();
    let expected_cols = if dim == 1 { 2 } else { 5 };
    let parse_err = |line: usize, message: String| BidomainError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };

    let mut out = Vec::with_capacity(grid.len());
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if out.is_empty() && fields[0].parse::<f64>().is_err() {
            continue;
        }
        let vals = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(lineno + 1, e.to_string()))?;
        if vals.len() != expected_cols {
            return Err(parse_err(
                lineno + 1,
                format!("expected {expected_cols} columns, found {}", vals.len()),
            ));
        }
        let node = out.len();
        if node >= grid.len() {
            return Err(parse_err(lineno + 1, "more rows than grid nodes".into()));
        }
        let c = grid.coords(node);
        for axis in 0..dim {
            if (vals[axis] - c[axis]).abs() > 1e-9 * grid.spacing()[axis] {
                return Err(parse_err(
                    lineno + 1,
                    format!(
                        "coordinate {} does not match grid node {node} ({})",
                        vals[axis], c[axis]
                    ),
                ));
            }
        }
        out.push(if dim == 1 {
            Tensor2::isotropic(vals[1])
        } else {
            Tensor2::symmetric(vals[2], vals[3], vals[4])
        });
    }
    if out.len() != grid.len() {
        return Err(BidomainError::Parse {
            path: path.to_path_buf(),
            message: format!("{} rows for {} grid nodes", out.len(), grid.len()),
        });
    }
    Ok(out)
}

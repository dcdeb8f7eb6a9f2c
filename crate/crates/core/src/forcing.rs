//! T-periodic source terms `s_i(t,x)`, `s_e(t,x)` built from separable
//! components `Σ_c θ_c(t) (s_i^c(x), s_e^c(x))`.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;

use crate::eigenbasis::EigenBasis;
use crate::error::{BidomainError, Result};
use crate::grid::Grid;
use crate::norms::SobolevNorms;
use crate::operators::BidomainOperator;

#[derive(Debug, Clone, PartialEq)]
pub enum TemporalShape {
    Sin,
    Cos,
    Square,
    Constant,
    /// Samples `(t, θ)` over one period, linearly interpolated and wrapped.
    Table(Vec<(f64, f64)>),
}

impl TemporalShape {
    /// Value at phase `tau ∈ [0, T)`.
    pub fn eval(&self, tau: f64, period: f64) -> f64 {
        let x = 2.0 * PI * tau / period;
        match self {
            TemporalShape::Sin => x.sin(),
            TemporalShape::Cos => x.cos(),
            TemporalShape::Square => {
                if tau < 0.5 * period {
                    1.0
                } else {
                    -1.0
                }
            }
            TemporalShape::Constant => 1.0,
            TemporalShape::Table(pts) => table_eval(pts, tau, period),
        }
    }

    /// Reads a two-column `t,value` CSV; a header line is skipped.
    pub fn load_csv(path: &Path, period: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parse_err = |message: String| BidomainError::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut pts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(parse_err(format!("line {}: expected 2 columns", lineno + 1)));
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(t), Ok(v)) => pts.push((t, v)),
                _ if pts.is_empty() && lineno == 0 => continue,
                _ => return Err(parse_err(format!("line {}: not numeric", lineno + 1))),
            }
        }
        if pts.is_empty() {
            return Err(parse_err("no samples".into()));
        }
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) || pts[0].0 < 0.0 || pts.last().unwrap().0 > period {
            return Err(parse_err(format!(
                "sample times must increase strictly within [0, {period}]"
            )));
        }
        Ok(TemporalShape::Table(pts))
    }
}

fn table_eval(pts: &[(f64, f64)], tau: f64, period: f64) -> f64 {
    if pts.len() == 1 {
        return pts[0].1;
    }
    let i = pts.partition_point(|p| p.0 <= tau);
    let (p0, p1) = if i == 0 {
        let last = pts[pts.len() - 1];
        ((last.0 - period, last.1), pts[0])
    } else if i == pts.len() {
        let first = pts[0];
        (pts[i - 1], (first.0 + period, first.1))
    } else {
        (pts[i - 1], pts[i])
    };
    if p1.0 == p0.0 {
        return p0.1;
    }
    p0.1 + (p1.1 - p0.1) * (tau - p0.0) / (p1.0 - p0.0)
}

/// Spatial shape of the intracellular source.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialProfile {
    /// `Π_d cos(m_d π x_d / L_d)`.
    Cosine([usize; 2]),
    /// Eigenvector `ψ_j` of the basis.
    Mode(usize),
    Constant,
    /// Indicator of the box `[lo, hi]`.
    Patch { lo: [f64; 2], hi: [f64; 2] },
    Nodal(Vec<f64>),
}

impl SpatialProfile {
    pub fn nodal(&self, grid: &Grid, basis: Option<&EigenBasis>) -> Result<Vec<f64>> {
        let n = grid.len();
        let v = match self {
            SpatialProfile::Cosine(m) => (0..n)
                .map(|i| {
                    let x = grid.coords(i);
                    (0..grid.dimension())
                        .map(|d| (m[d] as f64 * PI * x[d] / grid.extents()[d]).cos())
                        .product()
                })
                .collect(),
            SpatialProfile::Mode(j) => {
                let basis = basis.ok_or_else(|| {
                    BidomainError::invalid("forcing.mode", "mode profiles need an eigenbasis")
                })?;
                if *j >= basis.modes() {
                    return Err(BidomainError::invalid(
                        "forcing.mode",
                        format!("mode {j} exceeds the basis order {}", basis.order()),
                    ));
                }
                basis.vector(*j)
            }
            SpatialProfile::Constant => vec![1.0; n],
            SpatialProfile::Patch { lo, hi } => (0..n)
                .map(|i| {
                    let x = grid.coords(i);
                    let inside = (0..grid.dimension()).all(|d| x[d] >= lo[d] && x[d] <= hi[d]);
                    if inside {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            SpatialProfile::Nodal(v) => {
                if v.len() != n {
                    return Err(BidomainError::DimensionMismatch {
                        expected: n,
                        got: v.len(),
                    });
                }
                v.clone()
            }
        };
        Ok(v)
    }

    /// One value per node (`x[,y],value`), rows in node order.
    pub fn load_csv(grid: &Grid, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let d = grid.dimension();
        let mut vals = Vec::with_capacity(grid.len());
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            match parsed {
                Ok(p) if p.len() == d + 1 => vals.push(p[d]),
                Err(_) if vals.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(BidomainError::Parse {
                        path: path.to_path_buf(),
                        message: format!("line {}: expected {} numeric columns", lineno + 1, d + 1),
                    })
                }
            }
        }
        if vals.len() != grid.len() {
            return Err(BidomainError::Parse {
                path: path.to_path_buf(),
                message: format!("expected {} rows, found {}", grid.len(), vals.len()),
            });
        }
        Ok(SpatialProfile::Nodal(vals))
    }
}

/// One separable source term.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingComponent {
    pub s_i: Vec<f64>,
    pub s_e: Vec<f64>,
    pub shape: TemporalShape,
}

/// T-periodic forcing with cached modified sources, modal projections and
/// the `V'` Gram matrix of the components.
#[derive(Debug, Clone)]
pub struct Forcing {
    period: f64,
    components: Vec<ForcingComponent>,
    /// Modified source `s` per component (nodal).
    sources: Vec<Vec<f64>>,
    modal: Vec<Vec<f64>>,
    dual_gram: DMatrix<f64>,
    dropped_means: Vec<f64>,
}

impl Forcing {
    pub fn new(
        period: f64,
        components: Vec<ForcingComponent>,
        op: &BidomainOperator,
        basis: &EigenBasis,
        norms: &SobolevNorms,
    ) -> Result<Self> {
        let mut sources = Vec::with_capacity(components.len());
        let mut dropped_means = Vec::with_capacity(components.len());
        for c in &components {
            for v in [&c.s_i, &c.s_e] {
                if v.len() != op.len() {
                    return Err(BidomainError::DimensionMismatch {
                        expected: op.len(),
                        got: v.len(),
                    });
                }
            }
            let ms = op.modified_source(&c.s_i, &c.s_e);
            sources.push(ms.s);
            dropped_means.push(ms.dropped_mean);
        }
        Self::from_sources(period, components, sources, dropped_means, basis, norms)
    }

    /// Forcing given directly by modified sources `s` (no `s_i`/`s_e`
    /// split); the stored `s_i` equals `s` and `s_e` is zero.
    pub fn from_modified(
        period: f64,
        terms: Vec<(Vec<f64>, TemporalShape)>,
        basis: &EigenBasis,
        norms: &SobolevNorms,
    ) -> Result<Self> {
        let mut components = Vec::new();
        let mut sources = Vec::new();
        for (s, shape) in terms {
            components.push(ForcingComponent {
                s_i: s.clone(),
                s_e: vec![0.0; s.len()],
                shape,
            });
            sources.push(s);
        }
        let n = components.len();
        Self::from_sources(period, components, sources, vec![0.0; n], basis, norms)
    }

    pub fn zero(period: f64, basis: &EigenBasis, norms: &SobolevNorms) -> Result<Self> {
        Self::from_modified(period, Vec::new(), basis, norms)
    }

    fn from_sources(
        period: f64,
        components: Vec<ForcingComponent>,
        sources: Vec<Vec<f64>>,
        dropped_means: Vec<f64>,
        basis: &EigenBasis,
        norms: &SobolevNorms,
    ) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(BidomainError::invalid(
                "forcing.period",
                format!("must be positive, got {period}"),
            ));
        }
        for s in &sources {
            if s.len() != basis.nodes() {
                return Err(BidomainError::DimensionMismatch {
                    expected: basis.nodes(),
                    got: s.len(),
                });
            }
        }
        let modal = sources.iter().map(|s| basis.project(s)).collect();
        let nc = sources.len();
        let dual_gram = DMatrix::from_fn(nc, nc, |a, b| norms.dual_inner(&sources[a], &sources[b]));
        Ok(Forcing {
            period,
            components,
            sources,
            modal,
            dual_gram,
            dropped_means,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn components(&self) -> &[ForcingComponent] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.sources.iter().all(|s| s.iter().all(|&v| v == 0.0))
    }

    /// Means of `s_i + s_e` removed to keep the extracellular solve well posed.
    pub fn dropped_means(&self) -> &[f64] {
        &self.dropped_means
    }

    pub fn phase(&self, t: f64) -> f64 {
        t.rem_euclid(self.period)
    }

    pub fn weights(&self, t: f64) -> Vec<f64> {
        let tau = self.phase(t);
        self.components
            .iter()
            .map(|c| c.shape.eval(tau, self.period))
            .collect()
    }

    fn combine(&self, t: f64, fields: impl Fn(usize) -> Vec<f64>, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (c, theta) in self.weights(t).into_iter().enumerate() {
            for (o, v) in out.iter_mut().zip(fields(c)) {
                *o += theta * v;
            }
        }
        out
    }

    pub fn s_i(&self, t: f64, nodes: usize) -> Vec<f64> {
        self.combine(t, |c| self.components[c].s_i.clone(), nodes)
    }

    pub fn s_e(&self, t: f64, nodes: usize) -> Vec<f64> {
        self.combine(t, |c| self.components[c].s_e.clone(), nodes)
    }

    /// Nodal modified source `s(t)`.
    pub fn source(&self, t: f64, nodes: usize) -> Vec<f64> {
        self.combine(t, |c| self.sources[c].clone(), nodes)
    }

    /// `⟨s(t), ψ_j⟩` added into `out` (length = number of modes).
    pub fn add_modal(&self, t: f64, out: &mut [f64]) {
        if self.modal.is_empty() {
            return;
        }
        for (theta, m) in self.weights(t).into_iter().zip(&self.modal) {
            if theta == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(m) {
                *o += theta * v;
            }
        }
    }

    pub fn modal(&self, t: f64, modes: usize) -> Vec<f64> {
        let mut out = vec![0.0; modes];
        self.add_modal(t, &mut out);
        out
    }

    /// Cached modal projection per component.
    pub fn modal_components(&self) -> &[Vec<f64>] {
        &self.modal
    }

    /// `‖s(t)‖²_{V'}`.
    pub fn dual_norm_sq(&self, t: f64) -> f64 {
        let th = self.weights(t);
        let mut acc = 0.0;
        for a in 0..th.len() {
            for b in 0..th.len() {
                acc += th[a] * th[b] * self.dual_gram[(a, b)];
            }
        }
        acc.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_wraps_periodically() {
        let shape = TemporalShape::Table(vec![(0.0, 0.0), (1.0, 2.0)]);
        assert_eq!(shape.eval(0.5, 2.0), 1.0);
        // Between the last sample and the first one shifted by the period.
        assert_eq!(shape.eval(1.5, 2.0), 1.0);
        assert_eq!(TemporalShape::Square.eval(0.25, 1.0), 1.0);
        assert_eq!(TemporalShape::Square.eval(0.75, 1.0), -1.0);
    }
}

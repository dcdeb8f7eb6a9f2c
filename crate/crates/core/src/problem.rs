//! Assembly of everything a run needs from a [`RunConfig`].

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certificate::{derive_certificate, AssumptionCertificate};
use crate::conductivity::{load_tensor_csv, ConductivityField};
use crate::config::{ConductivitySpec, InitialState, ProfileSpec, RunConfig, ShapeSpec};
use crate::dynamics::{GalerkinSystem, ModalState};
use crate::eigenbasis::{coercivity_on_span, compute_eigenbasis, estimate_coercivity, CoercivityEstimate, EigenBasis};
use crate::error::{BidomainError, Result};
use crate::estimates::{a_priori_radius, propagate_constants, EnergyConstants};
use crate::forcing::{Forcing, ForcingComponent, SpatialProfile, TemporalShape};
use crate::grid::{build_grid, Grid};
use crate::ionic::IonicModel;
use crate::norms::SobolevNorms;
use crate::operators::BidomainOperator;
use crate::periodic::{Acceleration, PeriodicOptions};

/// Independent random streams, one per consumer, so adding samples to one
/// check never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Probes = 1,
    Ball = 2,
    Uniqueness = 3,
}

pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

pub struct Problem {
    pub config: RunConfig,
    pub seed: u64,
    pub grid: Grid,
    pub field: ConductivityField,
    pub op: BidomainOperator,
    pub norms: SobolevNorms,
    pub basis: EigenBasis,
    pub model: IonicModel,
    pub certificate: AssumptionCertificate,
    pub coercivity: CoercivityEstimate,
    pub alpha_span: f64,
    /// `min(probe estimate, exact value on the span)`.
    pub alpha: f64,
    pub constants: EnergyConstants,
    pub components: Vec<ForcingComponent>,
    pub forcing: Forcing,
    pub radius: f64,
    /// Wall-clock seconds per setup phase.
    pub timings: Vec<(String, f64)>,
}

fn timed<T>(timings: &mut Vec<(String, f64)>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.within(name))?;
    timings.push((name.to_string(), start.elapsed().as_secs_f64()));
    Ok(out)
}

pub fn load_field(grid: &Grid, config: &RunConfig) -> Result<ConductivityField> {
    let load = |spec: &ConductivitySpec| -> Result<Vec<_>> {
        match spec {
            ConductivitySpec::Constant(t) => Ok(vec![*t; grid.len()]),
            ConductivitySpec::Csv(p) => load_tensor_csv(grid, p),
        }
    };
    let c = &config.conductivity;
    ConductivityField::new(grid, load(&c.sigma_i)?, load(&c.sigma_e)?, c.bounds)
}

pub fn build_components(grid: &Grid, basis: &EigenBasis, config: &RunConfig) -> Result<Vec<ForcingComponent>> {
    let fc = &config.forcing;
    let profile = match &fc.profile {
        ProfileSpec::None => return Ok(Vec::new()),
        ProfileSpec::Constant => SpatialProfile::Constant,
        ProfileSpec::Cosine(m) => SpatialProfile::Cosine(*m),
        ProfileSpec::Mode(j) => SpatialProfile::Mode(*j),
        ProfileSpec::Patch { lo, hi } => SpatialProfile::Patch { lo: *lo, hi: *hi },
        ProfileSpec::Csv(p) => SpatialProfile::load_csv(grid, p)?,
    };
    if fc.amplitude == 0.0 {
        return Ok(Vec::new());
    }
    let shape = match &fc.shape {
        ShapeSpec::Sin => TemporalShape::Sin,
        ShapeSpec::Cos => TemporalShape::Cos,
        ShapeSpec::Square => TemporalShape::Square,
        ShapeSpec::Constant => TemporalShape::Constant,
        ShapeSpec::Csv(p) => TemporalShape::load_csv(p, fc.period)?,
    };
    let s_i: Vec<f64> = profile.nodal(grid, Some(basis))?.iter().map(|v| fc.amplitude * v).collect();
    let s_e = s_i.iter().map(|v| fc.extra_ratio * v).collect();
    Ok(vec![ForcingComponent { s_i, s_e, shape }])
}

impl Problem {
    pub fn build(config: RunConfig, seed: u64) -> Result<Self> {
        Self::build_with_order(config, seed, None)
    }

    /// Like [`Problem::build`] but with the basis order overridden (the
    /// convergence study needs the largest order it visits).
    pub fn build_with_order(config: RunConfig, seed: u64, order: Option<usize>) -> Result<Self> {
        let mut timings = Vec::new();
        let t = &mut timings;
        let grid = timed(t, "grid", || build_grid(&config.grid.extents, &config.grid.counts))?;
        let field = timed(t, "conductivity", || load_field(&grid, &config))?;
        let op = timed(t, "operator", || BidomainOperator::new(&grid, &field))?;
        let norms = timed(t, "norms", || SobolevNorms::new(&grid))?;
        let k = order.unwrap_or(config.solver.order);
        let basis = timed(t, "eigenbasis", || compute_eigenbasis(&op, k))?;
        let coercivity = timed(t, "coercivity", || {
            estimate_coercivity(&op, &norms, config.solver.probes, stream_seed(seed, Stream::Probes))
        })?;
        let alpha_span = coercivity_on_span(&basis, &norms);
        let alpha = coercivity.alpha.min(alpha_span);
        let model = config.model;
        let certificate = timed(t, "certificate", || derive_certificate(&model))?;
        let constants = propagate_constants(&certificate, alpha, grid.measure()).map_err(|e| e.within("constants"))?;
        let components = timed(t, "forcing", || build_components(&grid, &basis, &config))?;
        let forcing = Forcing::new(config.forcing.period, components.clone(), &op, &basis, &norms)
            .map_err(|e| e.within("forcing"))?;
        let radius = timed(t, "radius", || a_priori_radius(&forcing, &constants))?;
        Ok(Problem {
            config,
            seed,
            grid,
            field,
            op,
            norms,
            basis,
            model,
            certificate,
            coercivity,
            alpha_span,
            alpha,
            constants,
            components,
            forcing,
            radius,
            timings,
        })
    }

    pub fn system(&self) -> GalerkinSystem<'_> {
        GalerkinSystem::new(&self.basis, &self.model, &self.forcing)
    }

    pub fn periodic_options(&self) -> PeriodicOptions {
        let s = &self.config.solver;
        PeriodicOptions {
            tol: s.periodic_tol,
            max_iter: s.max_iter,
            accel: if s.accel_window == 0 {
                Acceleration::None
            } else {
                Acceleration::Anderson(s.accel_window)
            },
            integrator_tol: s.tol,
            samples_per_period: s.samples,
            r: self.certificate.r,
            radius: self.radius,
            ball_guard: s.ball_guard,
            ..PeriodicOptions::default()
        }
    }

    pub fn initial_state(&self) -> Result<ModalState> {
        match &self.config.solver.initial {
            InitialState::Zero => Ok(ModalState::zeros(self.basis.modes())),
            InitialState::File(p) => {
                let x = crate::output::read_modal_state(p)?;
                if x.modes() != self.basis.modes() {
                    return Err(BidomainError::DimensionMismatch {
                        expected: self.basis.modes(),
                        got: x.modes(),
                    });
                }
                Ok(x)
            }
        }
    }
}

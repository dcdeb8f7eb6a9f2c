//! The modal Galerkin system
//! `α̇_j = −λ_j α_j − (f(u_k,w_k), ψ_j) + ⟨s, ψ_j⟩`,
//! `β̇_j = −(g(u_k,w_k), ψ_j)`, with nonlinear terms by collocation.

use crate::eigenbasis::EigenBasis;
use crate::error::{BidomainError, Result};
use crate::forcing::Forcing;
use crate::integrator::{self, Semilinear, Trajectory};
use crate::ionic::Reaction;

/// Coefficients of `u_k = Σ α_j ψ_j` and `w_k = Σ β_j ψ_j` at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub time: f64,
}

impl ModalState {
    pub fn zeros(modes: usize) -> Self {
        ModalState {
            alpha: vec![0.0; modes],
            beta: vec![0.0; modes],
            time: 0.0,
        }
    }

    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, time: f64) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(BidomainError::DimensionMismatch {
                expected: alpha.len(),
                got: beta.len(),
            });
        }
        Ok(ModalState { alpha, beta, time })
    }

    /// Splits `[α; β]`.
    pub fn from_packed(y: &[f64], time: f64) -> Self {
        let m = y.len() / 2;
        ModalState {
            alpha: y[..m].to_vec(),
            beta: y[m..].to_vec(),
            time,
        }
    }

    pub fn packed(&self) -> Vec<f64> {
        let mut y = self.alpha.clone();
        y.extend_from_slice(&self.beta);
        y
    }

    pub fn modes(&self) -> usize {
        self.alpha.len()
    }

    /// `(r Σα² + Σβ²)^{1/2}`.
    pub fn weighted_norm(&self, r: f64) -> f64 {
        energy(self, r).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(|v| v.is_finite())
    }
}

/// `E = r Σα² + Σβ²`.
pub fn energy(state: &ModalState, r: f64) -> f64 {
    packed_energy(&state.packed(), r)
}

pub fn packed_energy(y: &[f64], r: f64) -> f64 {
    let m = y.len() / 2;
    r * y[..m].iter().map(|a| a * a).sum::<f64>() + y[m..].iter().map(|b| b * b).sum::<f64>()
}

/// Galerkin system for one basis, reaction and forcing. The `g₂ w` part of
/// the recovery equation is diagonal in the basis and is treated as part of
/// the linear operator together with `λ_j`.
pub struct GalerkinSystem<'a> {
    pub basis: &'a EigenBasis,
    pub model: &'a dyn Reaction,
    pub forcing: &'a Forcing,
    rates: Vec<f64>,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(basis: &'a EigenBasis, model: &'a dyn Reaction, forcing: &'a Forcing) -> Self {
        let g2 = model.g2();
        let mut rates = basis.eigenvalues.clone();
        rates.extend(std::iter::repeat_n(g2, basis.modes()));
        GalerkinSystem {
            basis,
            model,
            forcing,
            rates,
        }
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    /// Nodal `(u_k, w_k)` for a packed state.
    pub fn nodal_fields(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.modes();
        (self.basis.reconstruct(&y[..m]), self.basis.reconstruct(&y[m..]))
    }

    /// `((f(u_k,w_k), ψ_j), (g(u_k,w_k), ψ_j))` by collocation.
    pub fn reaction_projection(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (u, w) = self.nodal_fields(y);
        let f: Vec<f64> = u.iter().zip(&w).map(|(&u, &w)| self.model.f(u, w)).collect();
        let g: Vec<f64> = u.iter().zip(&w).map(|(&u, &w)| self.model.g(u, w)).collect();
        (self.basis.project(&f), self.basis.project(&g))
    }

    pub fn integrate(&self, state0: &ModalState, samples: &[f64], tol: f64) -> Result<Trajectory> {
        integrator::integrate(self, &state0.packed(), state0.time, samples, tol)
    }
}

impl Semilinear for GalerkinSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.modes()
    }

    fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn nonlinear(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let m = self.modes();
        let (u, w) = self.nodal_fields(y);
        let f: Vec<f64> = u
            .iter()
            .zip(&w)
            .map(|(&u, &w)| self.model.f1(u) + self.model.f2(u) * w)
            .collect();
        let g: Vec<f64> = u.iter().map(|&u| self.model.g1(u)).collect();
        let (oa, ob) = out.split_at_mut(m);
        self.basis.project_into(&f, oa);
        self.basis.project_into(&g, ob);
        for v in out.iter_mut() {
            *v = -*v;
        }
        self.forcing.add_modal(t, &mut out[..m]);
    }
}

/// Right-hand side `(α̇, β̇)` of the Galerkin system at `state`.
pub fn modal_rhs(
    basis: &EigenBasis,
    model: &dyn Reaction,
    forcing: &Forcing,
    state: &ModalState,
) -> (Vec<f64>, Vec<f64>) {
    let sys = GalerkinSystem::new(basis, model, forcing);
    let y = state.packed();
    let mut out = vec![0.0; y.len()];
    sys.rhs(state.time, &y, &mut out);
    let beta = out.split_off(basis.modes());
    (out, beta)
}

/// Adaptive integration from `state0` to `t1` with `samples` evenly spaced
/// output intervals.
pub fn integrate(
    basis: &EigenBasis,
    model: &dyn Reaction,
    forcing: &Forcing,
    state0: &ModalState,
    t1: f64,
    tol: f64,
    samples: usize,
) -> Result<Trajectory> {
    if !(t1 > state0.time) {
        return Err(BidomainError::invalid(
            "t1",
            format!("must exceed the initial time {}", state0.time),
        ));
    }
    let sys = GalerkinSystem::new(basis, model, forcing);
    sys.integrate(state0, &integrator::uniform_samples(state0.time, t1, samples), tol)
}

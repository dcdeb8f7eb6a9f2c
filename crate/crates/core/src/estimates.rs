//! Energy estimates of the Galerkin system: the dissipation inequality
//! `dE/dt + C₂₁(r‖u‖²_V + ‖u‖⁴_4 + ‖w‖²) ≤ C₂₂‖s‖²_{V'} + C₂₃`, its
//! Gronwall bound and the invariant radius of the Poincaré map.

use crate::certificate::AssumptionCertificate;
use crate::dynamics::{packed_energy, GalerkinSystem};
use crate::eigenbasis::EigenBasis;
use crate::error::{BidomainError, Result};
use crate::forcing::Forcing;
use crate::integrator::Trajectory;
use crate::norms::SobolevNorms;
use crate::quadrature;

/// Constants of the dissipation inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstants {
    pub r: f64,
    pub c21: f64,
    pub c22: f64,
    pub c23: f64,
}

/// Assembles `C₂₁, C₂₂, C₂₃` from the certificate and a coercivity constant.
///
/// With `E = r‖u‖² + ‖w‖²`, coercivity `a(u,u) ≥ α‖u‖²_V − α‖u‖²_H`, the
/// lower bound on `r f u + g w`, Young on `2r⟨s,u⟩ ≤ rα‖u‖²_V + (r/α)‖s‖²_{V'}`
/// and `2rα‖u‖²_H ≤ C₁‖u‖⁴_4 + r²α²|Ω|/C₁`:
///
/// `dE/dt + rα‖u‖²_V + C₁‖u‖⁴_4 + 2C₂‖w‖² ≤ (r/α)‖s‖²_{V'} + |Ω|(r²α²/C₁ − 2C₀)`.
pub fn propagate_constants(cert: &AssumptionCertificate, alpha: f64, measure: f64) -> Result<EnergyConstants> {
    if !(alpha > 0.0) {
        return Err(BidomainError::invalid(
            "alpha",
            format!("coercivity constant must be positive, got {alpha}"),
        ));
    }
    let r = cert.r;
    Ok(EnergyConstants {
        r,
        c21: alpha.min(cert.c1).min(2.0 * cert.c2),
        c22: r / alpha,
        c23: measure * (r * r * alpha * alpha / cert.c1 - 2.0 * cert.c0),
    })
}

/// `(C₄₁, C₄₂)` of `∫₀ᵀ(‖u‖²_V + ‖u‖⁴_4 + ‖w‖²) ≤ C₄₁‖s‖²_{L²V'} + C₄₂`
/// along periodic orbits.
pub fn uniform_bound_constants(c: &EnergyConstants, period: f64) -> (f64, f64) {
    let denom = c.c21 * c.r.min(1.0);
    (c.c22 / denom, c.c23 * period / denom)
}

fn check_c21(c: &EnergyConstants) -> Result<()> {
    if !(c.c21 > 0.0) {
        return Err(BidomainError::invalid(
            "c21",
            format!("dissipation rate must be positive, got {}", c.c21),
        ));
    }
    Ok(())
}

/// `∫_{t0}^{t1} e^{−C₂₁(t1−τ)} ‖s(τ)‖²_{V'} dτ`.
fn weighted_forcing(dual_norm: &impl Fn(f64) -> f64, c21: f64, t0: f64, t1: f64, period: f64) -> f64 {
    let mut acc = 0.0;
    let mut a = t0;
    while a < t1 {
        let b = (a + period).min(t1);
        acc += quadrature::adaptive_simpson(
            &|tau: f64| (-c21 * (t1 - tau)).exp() * dual_norm(tau),
            a,
            b,
            1e-14 * (b - a),
        );
        a = b;
    }
    acc
}

/// `e^{−C₂₁t}E₀ + ∫₀ᵗ e^{−C₂₁(t−τ)}(C₂₂‖s(τ)‖²_{V'} + C₂₃)dτ`.
pub fn gronwall_bound(e0: f64, forcing: &Forcing, c: &EnergyConstants, t: f64) -> Result<f64> {
    gronwall_bound_with(e0, |tau| forcing.dual_norm_sq(tau), forcing.period(), c, t)
}

pub fn gronwall_bound_with(
    e0: f64,
    dual_norm: impl Fn(f64) -> f64,
    period: f64,
    c: &EnergyConstants,
    t: f64,
) -> Result<f64> {
    check_c21(c)?;
    let decay = (-c.c21 * t).exp();
    let constant = c.c23 * -(-c.c21 * t).exp_m1() / c.c21;
    let forced = if c.c22 == 0.0 {
        0.0
    } else {
        c.c22 * weighted_forcing(&dual_norm, c.c21, 0.0, t, period)
    };
    Ok(decay * e0 + constant + forced)
}

/// Radius `R` with `R² = ∫₀ᵀe^{−C₂₁(T−τ)}(C₂₂‖s‖²_{V'} + C₂₃)dτ / (1 − e^{−C₂₁T})`;
/// the energy ball `r‖a‖² + ‖b‖² ≤ R²` is mapped into itself.
pub fn a_priori_radius(forcing: &Forcing, c: &EnergyConstants) -> Result<f64> {
    a_priori_radius_with(|tau| forcing.dual_norm_sq(tau), forcing.period(), c)
}

pub fn a_priori_radius_with(dual_norm: impl Fn(f64) -> f64, period: f64, c: &EnergyConstants) -> Result<f64> {
    check_c21(c)?;
    if !(period > 0.0) {
        return Err(BidomainError::invalid("forcing.period", "must be positive"));
    }
    let numerator = gronwall_bound_with(0.0, dual_norm, period, c, period)?;
    let r2 = numerator / -(-c.c21 * period).exp_m1();
    Ok(r2.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub times: Vec<f64>,
    /// `C₂₂‖s‖² + C₂₃ − dE/dt − C₂₁(r‖u‖²_V + ‖u‖⁴_4 + ‖w‖²)` per interior sample.
    pub slack: Vec<f64>,
    pub worst_slack: f64,
    pub worst_time: f64,
}

/// Evaluates the dissipation inequality along a sampled trajectory, with
/// `dE/dt` from centred differences (end samples dropped).
pub fn energy_dissipation_check(
    traj: &Trajectory,
    basis: &EigenBasis,
    forcing: &Forcing,
    norms: &SobolevNorms,
    c: &EnergyConstants,
) -> DissipationReport {
    let m = basis.modes();
    let energies: Vec<f64> = traj.states.iter().map(|y| packed_energy(y, c.r)).collect();
    let mut times = Vec::new();
    let mut slack = Vec::new();
    for i in 1..traj.len().saturating_sub(1) {
        let t = traj.times[i];
        let y = &traj.states[i];
        let de = (energies[i + 1] - energies[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
        let u = basis.reconstruct(&y[..m]);
        let w_sq: f64 = y[m..].iter().map(|b| b * b).sum();
        let dissipation = c.r * norms.v_norm_sq(&u) + norms.l4_pow4(&u) + w_sq;
        times.push(t);
        slack.push(c.c22 * forcing.dual_norm_sq(t) + c.c23 - de - c.c21 * dissipation);
    }
    let (worst_slack, worst_time) = slack
        .iter()
        .zip(&times)
        .fold((f64::INFINITY, f64::NAN), |acc, (&s, &t)| if s < acc.0 { (s, t) } else { acc });
    DissipationReport {
        times,
        slack,
        worst_slack,
        worst_time,
    }
}

/// `(∫₀ᵀ(‖u‖²_V + ‖u‖⁴_4 + ‖w‖²), C₄₁‖s‖²_{L²V'} + C₄₂)` over the trajectory span.
pub fn uniform_bound_check(
    traj: &Trajectory,
    sys: &GalerkinSystem<'_>,
    norms: &SobolevNorms,
    c: &EnergyConstants,
) -> (f64, f64) {
    let m = sys.modes();
    let vals: Vec<f64> = traj
        .states
        .iter()
        .map(|y| {
            let u = sys.basis.reconstruct(&y[..m]);
            norms.v_norm_sq(&u) + norms.l4_pow4(&u) + y[m..].iter().map(|b| b * b).sum::<f64>()
        })
        .collect();
    let lhs = quadrature::integrate(&traj.times, &vals);
    let (t0, t1) = (traj.times[0], *traj.times.last().unwrap());
    let s_sq = quadrature::adaptive_simpson(&|t| sys.forcing.dual_norm_sq(t), t0, t1, 1e-14 * (t1 - t0));
    let (c41, c42) = uniform_bound_constants(c, t1 - t0);
    (lhs, c41 * s_sq + c42)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(c21: f64, c22: f64, c23: f64) -> EnergyConstants {
        EnergyConstants { r: 1.0, c21, c22, c23 }
    }

    #[test]
    fn homogeneous_bound_decays() {
        let b = gronwall_bound_with(3.0, |_| 0.0, 1.0, &consts(0.5, 1.0, 0.0), 2.0).unwrap();
        assert!((b - 3.0 * (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn constant_forcing_closed_form() {
        let c = consts(0.7, 2.0, 0.5);
        let t = 3.0;
        let b = gronwall_bound_with(0.0, |_| 1.0, 1.0, &c, t).unwrap();
        let exact = (c.c22 + c.c23) * (1.0 - (-c.c21 * t).exp()) / c.c21;
        assert!((b - exact).abs() < 1e-12);
    }

    #[test]
    fn radius_examples() {
        let r = a_priori_radius_with(|_| 1.0, 10.0, &consts(1.0, 1.0, 0.0)).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
        let r = a_priori_radius_with(|_| 0.0, 10.0, &consts(0.3, 1.0, 2.0)).unwrap();
        assert!((r * r - 2.0 / 0.3).abs() < 1e-10);
        assert!(a_priori_radius_with(|_| 0.0, 10.0, &consts(0.0, 1.0, 2.0)).is_err());
    }
}

//! Machine-checkable constants for the dissipativity and growth conditions
//! `r f(u,w) u + g(u,w) w ≥ C₀ + C₁|u|⁴ + C₂|w|²`, `|f₁| ≤ C₃(1+|u|³)`,
//! `|f₂| ≤ C₄(1+|u|)`, `|g₁| ≤ C₅(1+|u|²)`.

use rayon::prelude::*;

use crate::error::{BidomainError, Result};
use crate::ionic::{IonicModel, ModelVariant, Reaction};
use crate::poly;

pub const GROWTH_EXPONENT: u32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCertificate {
    pub variant: ModelVariant,
    pub r: f64,
    pub p: u32,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// `‖f‖^{4/3}` bound: `|f(u,w)|^{4/3} ≤ C₆(1 + u⁴ + w²)`.
    pub c6: f64,
    /// `|g(u,w)|² ≤ C₇(1 + u⁴ + w²)`.
    pub c7: f64,
    pub derivation: Vec<(String, f64)>,
}

impl AssumptionCertificate {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.derivation.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    /// `r f u + g w − (C₀ + C₁u⁴ + C₂w²)`.
    pub fn margin(&self, model: &impl Reaction, u: f64, w: f64) -> f64 {
        self.r * model.f(u, w) * u + model.g(u, w) * w
            - (self.c0 + self.c1 * u.powi(4) + self.c2 * w * w)
    }
}

/// Smallest `K` with `|c·x^m| ≤ δx⁴ + K` for all real `x`, `m ∈ {1,2,3}`.
pub fn young_quartic(coef: f64, m: u32, delta: f64) -> f64 {
    let c = coef.abs();
    if c == 0.0 {
        return 0.0;
    }
    let m = m as f64;
    c * (1.0 - m / 4.0) * (m * c / (4.0 * delta)).powf(m / (4.0 - m))
}

/// Smallest `K` with `|c·u·w| ≤ δ_u u⁴ + δ_w w² + K`.
pub fn young_mixed(coef: f64, delta_u: f64, delta_w: f64) -> f64 {
    coef.powi(4) / (64.0 * delta_w * delta_w * delta_u)
}

pub fn derive_certificate(model: &IonicModel) -> Result<AssumptionCertificate> {
    if model.variant == ModelVariant::AlievPanfilov && model.b <= model.k {
        return Err(BidomainError::CertificateInfeasible(format!(
            "Aliev-Panfilov needs b > k to absorb the u²w coupling (b = {}, k = {})",
            model.b, model.k
        )));
    }
    model.validate()?;
    let mut cert = match model.variant {
        ModelVariant::FitzHughNagumo => fitzhugh_nagumo(model),
        _ => balanced(model)?,
    };
    attach_growth(model, &mut cert);
    Ok(cert)
}

fn fitzhugh_nagumo(m: &IonicModel) -> AssumptionCertificate {
    let (a, eps, k) = (m.a, m.eps, m.k);
    let c11 = young_quartic(a + 1.0, 3, 0.125);
    let c12 = young_quartic(a, 2, 0.125);
    let c13 = young_mixed(1.0, 0.125, eps / 4.0);
    let c14 = young_mixed(eps * k, 0.125, eps / 4.0);
    AssumptionCertificate {
        variant: m.variant,
        r: 1.0,
        p: GROWTH_EXPONENT,
        c0: -(c11 + c12 + c13 + c14),
        c1: 0.5,
        c2: eps / 2.0,
        c3: 0.0,
        c4: 0.0,
        c5: 0.0,
        c6: 0.0,
        c7: 0.0,
        derivation: vec![
            ("c11".into(), c11),
            ("c12".into(), c12),
            ("c13".into(), c13),
            ("c14".into(), c14),
        ],
    }
}

/// Coefficient of the `u²w` coupling for a given `r`.
fn coupling(m: &IonicModel, r: f64) -> f64 {
    match m.variant {
        ModelVariant::AlievPanfilov => r + m.eps * m.k,
        _ => r,
    }
}

/// For fixed `r`, the split `C²` at which `rb − C²/2 = ε − q²/(2C²)`.
fn balanced_split(m: &IonicModel, r: f64) -> (f64, f64, f64) {
    let q = coupling(m, r);
    let s = r * m.b - m.eps;
    let c_sq = s + (s * s + q * q).sqrt();
    let quartic = r * m.b - c_sq / 2.0;
    let quadratic = m.eps - q * q / (2.0 * c_sq);
    (c_sq, quartic, quadratic)
}

fn feasible_r(m: &IonicModel) -> (f64, f64) {
    match m.variant {
        ModelVariant::AlievPanfilov => {
            let (b, k, e) = (m.b, m.k, m.eps);
            let centre = e * (2.0 * b - k);
            let half = 2.0 * e * (b * (b - k)).sqrt();
            (centre - half, centre + half)
        }
        _ => (0.0, 4.0 * m.eps * m.b),
    }
}

fn balanced(m: &IonicModel) -> Result<AssumptionCertificate> {
    let (lo, hi) = feasible_r(m);
    if !(hi > lo) {
        return Err(BidomainError::CertificateInfeasible(format!(
            "no admissible r for {} with b = {}, k = {}",
            m.variant, m.b, m.k
        )));
    }
    let objective = |r: f64| {
        let (_, c1, c2) = balanced_split(m, r);
        c1.min(c2)
    };
    let r = golden_section_max(objective, lo, hi, 1e-13 * hi.max(1.0));
    let (c_sq, c_u, c_w) = balanced_split(m, r);
    if !(c_u > 0.0 && c_w > 0.0) {
        return Err(BidomainError::CertificateInfeasible(format!(
            "split constants not positive: {c_u:e}, {c_w:e}"
        )));
    }
    let cubic = r * m.b * (m.a + 1.0);
    let square = r * m.b * m.a;
    let mixed = match m.variant {
        ModelVariant::AlievPanfilov => m.eps * m.k * (1.0 + m.d),
        _ => m.eps * m.k,
    };
    let k3 = young_quartic(cubic, 3, c_u / 6.0);
    let k4 = young_quartic(square, 2, c_u / 6.0);
    let k5 = young_mixed(mixed, c_u / 6.0, c_w / 2.0);
    Ok(AssumptionCertificate {
        variant: m.variant,
        r,
        p: GROWTH_EXPONENT,
        c0: -(k3 + k4 + k5),
        c1: c_u / 2.0,
        c2: c_w / 2.0,
        c3: 0.0,
        c4: 0.0,
        c5: 0.0,
        c6: 0.0,
        c7: 0.0,
        derivation: vec![
            ("split_c_squared".into(), c_sq),
            ("quartic_margin".into(), c_u),
            ("quadratic_margin".into(), c_w),
            ("young_cubic".into(), k3),
            ("young_square".into(), k4),
            ("young_mixed".into(), k5),
            ("r_lower".into(), lo),
            ("r_upper".into(), hi),
        ],
    })
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

fn attach_growth(m: &IonicModel, cert: &mut AssumptionCertificate) {
    let c3 = m.cubic_scale() * (2.0 + 2.0 * m.a);
    let c4 = 1.0;
    let c5 = match m.variant {
        ModelVariant::AlievPanfilov => m.eps * m.k * (1.0 + (1.0 + m.d) / 2.0),
        _ => m.eps * m.k,
    };
    let cbrt2 = 2f64.cbrt();
    cert.c3 = c3;
    cert.c4 = c4;
    cert.c5 = c5;
    cert.c6 = cbrt2 * (cbrt2 * c3.powf(4.0 / 3.0) + 8.0 / 3.0 * c4.powf(4.0 / 3.0));
    cert.c7 = (4.0 * c5 * c5).max(2.0 * m.g2() * m.g2());
}

/// Rectangular sampling lattice for `(u, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub u_min: f64,
    pub u_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub step: f64,
}

impl Lattice {
    pub fn square(half_width: f64, step: f64) -> Self {
        Lattice {
            u_min: -half_width,
            u_max: half_width,
            w_min: -half_width,
            w_max: half_width,
            step,
        }
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + step * i as f64).collect()
    }

    pub fn u_values(&self) -> Vec<f64> {
        Self::axis(self.u_min, self.u_max, self.step)
    }

    pub fn w_values(&self) -> Vec<f64> {
        Self::axis(self.w_min, self.w_max, self.step)
    }

    /// Maximum of `h` over the lattice with its argument.
    fn max_of(&self, h: impl Fn(f64, f64) -> f64 + Sync) -> (f64, (f64, f64)) {
        let us = self.u_values();
        let ws = self.w_values();
        us.par_iter()
            .map(|&u| {
                ws.iter()
                    .map(|&w| (h(u, w), (u, w)))
                    .fold((f64::NEG_INFINITY, (u, 0.0)), |acc, x| if x.0 > acc.0 { x } else { acc })
            })
            .reduce(
                || (f64::NEG_INFINITY, (0.0, 0.0)),
                |acc, x| if x.0 > acc.0 { x } else { acc },
            )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub lattice_min: f64,
    pub lattice_argmin: (f64, f64),
    /// Global minimum over ℝ² from the critical points of the margin.
    pub exact_min: f64,
    pub exact_argmin: (f64, f64),
    pub origin_margin: f64,
    pub pass: bool,
}

pub fn verify_certificate(
    model: &IonicModel,
    cert: &AssumptionCertificate,
    lattice: &Lattice,
) -> CertificateReport {
    // Scale-aware rounding slack: the terms reach ~u⁴ on wide lattices.
    let (neg_min, arg) = lattice.max_of(|u, w| -cert.margin(model, u, w));
    let scaled = lattice
        .max_of(|u, w| {
            let scale = 1.0 + (cert.r * model.f(u, w) * u).abs() + (model.g(u, w) * w).abs()
                + cert.c0.abs()
                + cert.c1 * u.powi(4)
                + cert.c2 * w * w;
            -cert.margin(model, u, w) / scale
        })
        .0;
    let (exact_min, exact_argmin) = exact_margin_min(model, cert);
    let exact_ok = exact_min >= -1e-9 * (1.0 + cert.c0.abs());
    CertificateReport {
        lattice_min: -neg_min,
        lattice_argmin: arg,
        exact_min,
        exact_argmin,
        origin_margin: cert.margin(model, 0.0, 0.0),
        pass: scaled <= 1e-12 && exact_ok,
    }
}

/// Minimizes the margin over all of ℝ²: it is quadratic in `w`, so the
/// minimum over `w` is a quartic in `u` whose critical points are found as
/// real roots of a cubic.
fn exact_margin_min(model: &IonicModel, cert: &AssumptionCertificate) -> (f64, (f64, f64)) {
    let (f1, f2, g1) = model.polynomials();
    let r = cert.r;
    // A(u) = r f₁(u) u − C₀ − C₁u⁴
    let mut a = poly::mul(&f1, &[0.0, r]);
    a = poly::add(&a, &[-cert.c0, 0.0, 0.0, 0.0, -cert.c1]);
    // B(u) = r f₂(u) u + g₁(u)
    let b = poly::add(&poly::mul(&f2, &[0.0, r]), &g1);
    let cw = model.g2() - cert.c2;
    let b_zero = poly::trim(&b).iter().all(|&c| c == 0.0);
    if cw < 0.0 || (cw == 0.0 && !b_zero) {
        return (f64::NEG_INFINITY, (0.0, f64::INFINITY));
    }
    let reduced = if b_zero {
        a.clone()
    } else {
        poly::add(&a, &poly::scale(&poly::mul(&b, &b), -1.0 / (4.0 * cw)))
    };
    let reduced = poly::trim(&reduced);
    let deg = reduced.len().saturating_sub(1);
    if deg % 2 == 1 || reduced.last().copied().unwrap_or(0.0) < 0.0 {
        return (f64::NEG_INFINITY, (f64::INFINITY, 0.0));
    }
    let mut best = (poly::eval(&reduced, 0.0), 0.0);
    for u in poly::real_roots(&poly::derivative(&reduced)) {
        let v = poly::eval(&reduced, u);
        if v < best.0 {
            best = (v, u);
        }
    }
    let u = best.1;
    let w = if b_zero { 0.0 } else { -poly::eval(&b, u) / (2.0 * cw) };
    (cert.margin(model, u, w), (u, w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub c3_lattice: f64,
    pub c4_lattice: f64,
    pub c5_lattice: f64,
    pub c6_lattice: f64,
    pub c7_lattice: f64,
    pub pass: bool,
}

pub fn verify_growth(
    model: &IonicModel,
    cert: &AssumptionCertificate,
    lattice: &Lattice,
) -> GrowthReport {
    let us = lattice.u_values();
    let sup = |h: &dyn Fn(f64) -> f64| us.iter().map(|&u| h(u)).fold(0.0f64, f64::max);
    let c3_lattice = sup(&|u| model.f1(u).abs() / (1.0 + u.abs().powi(3)));
    let c4_lattice = sup(&|u| model.f2(u).abs() / (1.0 + u.abs()));
    let c5_lattice = sup(&|u| model.g1(u).abs() / (1.0 + u * u));
    let c6_lattice = lattice
        .max_of(|u, w| model.f(u, w).abs().powf(4.0 / 3.0) / (1.0 + u.powi(4) + w * w))
        .0;
    let c7_lattice = lattice
        .max_of(|u, w| model.g(u, w).powi(2) / (1.0 + u.powi(4) + w * w))
        .0;
    let covers = |analytic: f64, measured: f64| analytic >= measured * (1.0 - 1e-12);
    let pass = covers(cert.c3, c3_lattice)
        && covers(cert.c4, c4_lattice)
        && covers(cert.c5, c5_lattice)
        && covers(cert.c6, c6_lattice)
        && covers(cert.c7, c7_lattice);
    GrowthReport {
        c3_lattice,
        c4_lattice,
        c5_lattice,
        c6_lattice,
        c7_lattice,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedLipschitz {
    pub lambda_f: f64,
    /// Minimizer of `f′`, `(a+1)/3`.
    pub minimizer: f64,
    /// Smallest `f′` seen on the lattice's `u` axis.
    pub lattice_min_slope: f64,
}

/// `λ_f = max(0, −min f′)` for `f(u) = u(u−a)(u−1)`.
pub fn one_sided_lipschitz(model: &IonicModel, lattice: &Lattice) -> Result<OneSidedLipschitz> {
    if model.variant != ModelVariant::FitzHughNagumo {
        return Err(BidomainError::UnsupportedModel(format!(
            "one-sided Lipschitz constant is only derived for fitzhugh-nagumo, got {}",
            model.variant
        )));
    }
    let a = model.a;
    let slope = |u: f64| 3.0 * u * u - 2.0 * (a + 1.0) * u + a;
    let minimizer = (a + 1.0) / 3.0;
    let lambda_f = ((a + 1.0).powi(2) / 3.0 - a).max(0.0);
    let lattice_min_slope = lattice
        .u_values()
        .into_iter()
        .map(slope)
        .fold(f64::INFINITY, f64::min);
    Ok(OneSidedLipschitz {
        lambda_f,
        minimizer,
        lattice_min_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundReport {
    pub c0: f64,
    pub achieved_c1: f64,
    pub min_margin: f64,
    pub pass: bool,
}

/// Checks `C₀ + C₁u⁴ ≤ f(u,0)u` on the lattice's `u` axis with the
/// certificate's `C₀, C₁`.
pub fn verify_cubic_lower_bound(
    model: &IonicModel,
    cert: &AssumptionCertificate,
    lattice: &Lattice,
) -> LowerBoundReport {
    let min_margin = lattice
        .u_values()
        .into_iter()
        .map(|u| model.f1(u) * u - cert.c0 - cert.c1 * u.powi(4))
        .fold(f64::INFINITY, f64::min);
    LowerBoundReport {
        c0: cert.c0,
        achieved_c1: cert.c1,
        min_margin,
        pass: min_margin >= -1e-9 * (1.0 + cert.c0.abs()),
    }
}

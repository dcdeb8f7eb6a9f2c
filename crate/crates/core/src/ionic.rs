//! Ionic current models `f(u,w) = f₁(u) + f₂(u) w`, `g(u,w) = g₁(u) + g₂ w`.

use std::fmt;
use std::str::FromStr;

use crate::error::{BidomainError, Result};

/// Reaction terms in the split form used by the Galerkin system.
pub trait Reaction: Sync + Send {
    fn f1(&self, u: f64) -> f64;
    fn f2(&self, u: f64) -> f64;
    fn g1(&self, u: f64) -> f64;
    fn g2(&self) -> f64;

    fn f(&self, u: f64, w: f64) -> f64 {
        self.f1(u) + self.f2(u) * w
    }

    fn g(&self, u: f64, w: f64) -> f64 {
        self.g1(u) + self.g2() * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    FitzHughNagumo,
    RogersMcCulloch,
    AlievPanfilov,
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::FitzHughNagumo => "fitzhugh-nagumo",
            ModelVariant::RogersMcCulloch => "rogers-mcculloch",
            ModelVariant::AlievPanfilov => "aliev-panfilov",
        })
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fitzhugh-nagumo" | "fhn" => Ok(ModelVariant::FitzHughNagumo),
            "rogers-mcculloch" | "rmc" => Ok(ModelVariant::RogersMcCulloch),
            "aliev-panfilov" | "ap" => Ok(ModelVariant::AlievPanfilov),
            other => Err(format!("unknown model variant `{other}`")),
        }
    }
}

/// One of the three cubic ionic models.
///
/// * FitzHugh–Nagumo: `f = u(u−a)(u−1) + w`, `g = −ε(ku − w)`
/// * Rogers–McCulloch: `f = b u(u−a)(u−1) + uw`, `g = −ε(ku − w)`
/// * Aliev–Panfilov (modified): `f = b u(u−a)(u−1) + uw`, `g = ε(ku(u−1−d) + w)`
///
/// `b` is ignored by FitzHugh–Nagumo and `d` is only used by Aliev–Panfilov.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonicModel {
    pub variant: ModelVariant,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub eps: f64,
    pub d: f64,
}

impl IonicModel {
    pub fn fitzhugh_nagumo(a: f64, k: f64, eps: f64) -> Self {
        IonicModel {
            variant: ModelVariant::FitzHughNagumo,
            a,
            b: 1.0,
            k,
            eps,
            d: 0.0,
        }
    }

    pub fn rogers_mcculloch(a: f64, b: f64, k: f64, eps: f64) -> Self {
        IonicModel {
            variant: ModelVariant::RogersMcCulloch,
            a,
            b,
            k,
            eps,
            d: 0.0,
        }
    }

    pub fn aliev_panfilov(a: f64, b: f64, k: f64, eps: f64, d: f64) -> Self {
        IonicModel {
            variant: ModelVariant::AlievPanfilov,
            a,
            b,
            k,
            eps,
            d,
        }
    }

    /// Cubic coefficient scale: 1 for FitzHugh–Nagumo, `b` otherwise.
    pub fn cubic_scale(&self) -> f64 {
        match self.variant {
            ModelVariant::FitzHughNagumo => 1.0,
            _ => self.b,
        }
    }

    /// Checks the parameter ranges without the `b > k` requirement.
    pub fn validate_ranges(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(BidomainError::invalid(
                    format!("model.{name}"),
                    format!("must satisfy 0 < {name} < 1, got {v}"),
                ))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(BidomainError::invalid(
                    format!("model.{name}"),
                    format!("must be positive, got {v}"),
                ))
            }
        };
        open_unit("a", self.a)?;
        positive("k", self.k)?;
        positive("eps", self.eps)?;
        if self.variant != ModelVariant::FitzHughNagumo {
            positive("b", self.b)?;
        }
        if self.variant == ModelVariant::AlievPanfilov {
            open_unit("d", self.d)?;
        }
        Ok(())
    }

    /// Full validation including `b > k` for Aliev–Panfilov.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        if self.variant == ModelVariant::AlievPanfilov && self.b <= self.k {
            return Err(BidomainError::invalid(
                "model.b",
                format!(
                    "Aliev-Panfilov requires b > k, got b = {}, k = {}",
                    self.b, self.k
                ),
            ));
        }
        Ok(())
    }

    /// Coefficients (ascending powers of `u`) of `f₁`, `f₂` and `g₁`.
    pub fn polynomials(&self) -> ([f64; 4], [f64; 4], [f64; 4]) {
        let c = self.cubic_scale();
        let f1 = [0.0, c * self.a, -c * (self.a + 1.0), c];
        let f2 = match self.variant {
            ModelVariant::FitzHughNagumo => [1.0, 0.0, 0.0, 0.0],
            _ => [0.0, 1.0, 0.0, 0.0],
        };
        let g1 = match self.variant {
            ModelVariant::AlievPanfilov => {
                let ek = self.eps * self.k;
                [0.0, -ek * (1.0 + self.d), ek, 0.0]
            }
            _ => [0.0, -self.eps * self.k, 0.0, 0.0],
        };
        (f1, f2, g1)
    }

    /// `(θ, γ, η)` of the linear-recovery form `∂_t w + γ w − η u = 0`,
    /// `f(u) + θ w`. Only defined for FitzHugh–Nagumo.
    pub fn recovery_parameters(&self) -> Option<(f64, f64, f64)> {
        (self.variant == ModelVariant::FitzHughNagumo).then_some((1.0, self.eps, self.eps * self.k))
    }
}

impl Reaction for IonicModel {
    fn f1(&self, u: f64) -> f64 {
        self.cubic_scale() * u * (u - self.a) * (u - 1.0)
    }

    fn f2(&self, u: f64) -> f64 {
        match self.variant {
            ModelVariant::FitzHughNagumo => 1.0,
            _ => u,
        }
    }

    fn g1(&self, u: f64) -> f64 {
        match self.variant {
            ModelVariant::AlievPanfilov => self.eps * self.k * u * (u - 1.0 - self.d),
            _ => -self.eps * self.k * u,
        }
    }

    fn g2(&self) -> f64 {
        self.eps
    }
}

/// Linear reaction `f = f_u u + f_w w`, `g = g_u u + g_w w`, used to check
/// the dynamics against closed-form solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSurrogate {
    pub f_u: f64,
    pub f_w: f64,
    pub g_u: f64,
    pub g_w: f64,
}

impl LinearSurrogate {
    pub fn zero() -> Self {
        LinearSurrogate {
            f_u: 0.0,
            f_w: 0.0,
            g_u: 0.0,
            g_w: 0.0,
        }
    }
}

impl Reaction for LinearSurrogate {
    fn f1(&self, u: f64) -> f64 {
        self.f_u * u
    }

    fn f2(&self, _u: f64) -> f64 {
        self.f_w
    }

    fn g1(&self, u: f64) -> f64 {
        self.g_u * u
    }

    fn g2(&self) -> f64 {
        self.g_w
    }
}

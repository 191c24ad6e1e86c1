//! Manufactured solution for the steady viscous Burgers equation
//!
//! The field
//!
//! ```text
//! u(x; ν) = sin(2πx) + ½·L·sin(6πx) + L + 2,   L = log(1/ν)
//! ```
//!
//! is an exact steady solution of `u u_x = ν u_xx + S(x, ν)` once the forcing
//! `S = u u_x − ν u_xx` is added. Derivatives are closed-form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest viscosity used by any generated scenario.
pub const NU_MIN: f64 = 1e-6;
/// Largest viscosity used by any generated scenario.
pub const NU_MAX: f64 = 1e-1;

/// Kinematic viscosity ν (strictly positive).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Viscosity(f64);

impl Viscosity {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidViscosity(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Viscosity {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Viscosity> for f64 {
    fn from(nu: Viscosity) -> f64 {
        nu.0
    }
}

/// Base of the logarithm in the `log(1/ν)` amplitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Base10,
}

impl LogBase {
    /// `log(1/ν)` in this base.
    #[inline]
    pub fn log_inv(self, nu: Viscosity) -> f64 {
        match self {
            LogBase::Natural => -nu.0.ln(),
            LogBase::Base10 => -nu.0.log10(),
        }
    }
}

/// Field value, first and second spatial derivatives and forcing at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsEval {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    pub source: f64,
}

/// The manufactured problem for a fixed logarithm base.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manufactured {
    pub log_base: LogBase,
}

impl Manufactured {
    pub fn new(log_base: LogBase) -> Self {
        Self { log_base }
    }

    pub fn u(&self, x: f64, nu: Viscosity) -> f64 {
        eval_mms(x, nu, self.log_base)
    }

    pub fn derivs(&self, x: f64, nu: Viscosity) -> MmsEval {
        eval_mms_derivs(x, nu, self.log_base)
    }

    pub fn source(&self, x: f64, nu: Viscosity) -> f64 {
        eval_mms_derivs(x, nu, self.log_base).source
    }

    /// Steady residual `u u_x − ν u_xx − S(x, ν)` of an arbitrary field triple.
    pub fn residual(&self, u: f64, du: f64, d2u: f64, x: f64, nu: Viscosity) -> f64 {
        residual_of_field(u, du, d2u, x, nu, self.log_base)
    }

    /// Inflow Dirichlet value `u(−1; ν)`.
    pub fn inflow(&self, nu: Viscosity) -> f64 {
        eval_mms(-1.0, nu, self.log_base)
    }
}

pub fn eval_mms(x: f64, nu: Viscosity, log_base: LogBase) -> f64 {
    let l = log_base.log_inv(nu);
    (2.0 * PI * x).sin() + 0.5 * l * (6.0 * PI * x).sin() + l + 2.0
}

pub fn eval_mms_derivs(x: f64, nu: Viscosity, log_base: LogBase) -> MmsEval {
    let l = log_base.log_inv(nu);
    let (s2, c2) = (2.0 * PI * x).sin_cos();
    let (s6, c6) = (6.0 * PI * x).sin_cos();
    let u = s2 + 0.5 * l * s6 + l + 2.0;
    let du = 2.0 * PI * c2 + 3.0 * PI * l * c6;
    let d2u = -4.0 * PI * PI * s2 - 18.0 * PI * PI * l * s6;
    let source = u * du - nu.value() * d2u;
    MmsEval { u, du, d2u, source }
}

pub fn residual_of_field(u: f64, du: f64, d2u: f64, x: f64, nu: Viscosity, log_base: LogBase) -> f64 {
    let s = eval_mms_derivs(x, nu, log_base).source;
    u * du - nu.value() * d2u - s
}

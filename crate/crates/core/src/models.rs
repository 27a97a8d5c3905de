//! Local-volatility models and the coefficient jets the kernel consumes.
//!
//! A model describes the Fokker-Planck operator
//! `L(t) = a(t,x)^2/2 d_xx + b(t,x) d_x + c(t,x)`. The asymptotic kernels up
//! to second order only need the values `a, a', a'', da/dt, b, b', c` frozen
//! at `(0, z)`, which is what [`CoefficientJet`] carries.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Operator coefficients and their derivatives at `(t = 0, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientJet {
    pub a: f64,
    pub da_dx: f64,
    pub d2a_dx2: f64,
    pub da_dt: f64,
    pub b: f64,
    pub db_dx: f64,
    pub c: f64,
}

impl CoefficientJet {
    fn fields(&self) -> [f64; 7] {
        [
            self.a,
            self.da_dx,
            self.d2a_dx2,
            self.da_dt,
            self.b,
            self.db_dx,
            self.c,
        ]
    }

    /// Checks strict positivity of `a` and finiteness of every field.
    pub fn validate(self, z: f64) -> Result<Self> {
        if self.fields().iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateCoefficient {
                z,
                reason: "non-finite jet entry".into(),
            });
        }
        if self.a <= 0.0 {
            return Err(Error::DegenerateCoefficient {
                z,
                reason: format!("a = {} is not strictly positive", self.a),
            });
        }
        Ok(self)
    }
}

type JetFn = dyn Fn(f64) -> CoefficientJet + Send + Sync;

/// User-supplied analytic jet `z -> CoefficientJet`.
#[derive(Clone)]
pub struct CustomJet {
    name: String,
    f: Arc<JetFn>,
}

impl CustomJet {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> CoefficientJet + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomJet").field("name", &self.name).finish()
    }
}

/// A one-factor local-volatility model in the risk-neutral measure
/// (`b = r x`, `c = -r` for the built-in kinds).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Model {
    /// `a = sigma x`.
    Bsm { sigma: f64, r: f64 },
    /// `a = sigma(t) x` with `sigma(0) = sigma` and `sigma'(0) = sigma_dot0`.
    TimeDependentBsm { sigma: f64, sigma_dot0: f64, r: f64 },
    /// `a = sigma x^alpha`, `0 < alpha <= 1`.
    Cev { sigma: f64, alpha: f64, r: f64 },
    #[serde(skip)]
    Custom(CustomJet),
}

impl Model {
    pub fn bsm(sigma: f64, r: f64) -> Result<Self> {
        Model::Bsm { sigma, r }.validated()
    }

    pub fn time_dependent_bsm(sigma: f64, sigma_dot0: f64, r: f64) -> Result<Self> {
        Model::TimeDependentBsm {
            sigma,
            sigma_dot0,
            r,
        }
        .validated()
    }

    pub fn cev(sigma: f64, alpha: f64, r: f64) -> Result<Self> {
        Model::Cev { sigma, alpha, r }.validated()
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> CoefficientJet + Send + Sync + 'static) -> Self {
        Model::Custom(CustomJet::new(name, f))
    }

    /// Parses and validates a JSON model definition such as
    /// `{"kind":"cev","sigma":0.3,"alpha":0.6667,"r":0.1}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let m: Model =
            serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))?;
        m.validated()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn validated(self) -> Result<Self> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be finite, got {v}")))
            }
        };
        let positive_sigma = |sigma: f64| {
            if sigma.is_finite() && sigma > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("sigma must be > 0, got {sigma}")))
            }
        };
        match &self {
            Model::Bsm { sigma, r } => {
                positive_sigma(*sigma)?;
                finite("r", *r)?;
            }
            Model::TimeDependentBsm {
                sigma,
                sigma_dot0,
                r,
            } => {
                positive_sigma(*sigma)?;
                finite("sigma_dot0", *sigma_dot0)?;
                finite("r", *r)?;
            }
            Model::Cev { sigma, alpha, r } => {
                positive_sigma(*sigma)?;
                finite("r", *r)?;
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::InvalidModel(format!(
                        "alpha must lie in (0, 1], got {alpha}"
                    )));
                }
            }
            Model::Custom(_) => {}
        }
        Ok(self)
    }

    /// Interest rate for the built-in kinds; `-c` at `z` for custom models.
    pub fn rate(&self, z: f64) -> Result<f64> {
        match self {
            Model::Bsm { r, .. } | Model::TimeDependentBsm { r, .. } | Model::Cev { r, .. } => {
                Ok(*r)
            }
            Model::Custom(_) => Ok(-self.jet(z)?.c),
        }
    }

    /// Exact analytic jet at `(0, z)`.
    pub fn jet(&self, z: f64) -> Result<CoefficientJet> {
        if !(z.is_finite() && z > 0.0) {
            return Err(domain(format!("jet requires z > 0, got {z}")));
        }
        let jet = match self {
            Model::Bsm { sigma, r } => CoefficientJet {
                a: sigma * z,
                da_dx: *sigma,
                d2a_dx2: 0.0,
                da_dt: 0.0,
                b: r * z,
                db_dx: *r,
                c: -r,
            },
            Model::TimeDependentBsm {
                sigma,
                sigma_dot0,
                r,
            } => CoefficientJet {
                a: sigma * z,
                da_dx: *sigma,
                d2a_dx2: 0.0,
                da_dt: sigma_dot0 * z,
                b: r * z,
                db_dx: *r,
                c: -r,
            },
            Model::Cev { sigma, alpha, r } => CoefficientJet {
                a: sigma * z.powf(*alpha),
                da_dx: alpha * sigma * z.powf(alpha - 1.0),
                d2a_dx2: alpha * (alpha - 1.0) * sigma * z.powf(alpha - 2.0),
                da_dt: 0.0,
                b: r * z,
                db_dx: *r,
                c: -r,
            },
            Model::Custom(custom) => (custom.f)(z),
        };
        jet.validate(z)
    }

    /// Raw coefficients `(a, b, c)` at `(t, x)`.
    ///
    /// Time dependence beyond `t = 0` is taken to first order from the jet,
    /// `a(t, x) = a(0, x) + t da/dt(0, x)`; for the time-dependent BSM model
    /// this is exactly `sigma(t) = sigma + sigma_dot0 t`.
    pub fn coefficients(&self, t: f64, x: f64) -> Result<(f64, f64, f64)> {
        let j = self.jet(x)?;
        Ok((j.a + t * j.da_dt, j.b, j.c))
    }
}

/// Rule for the Taylor basepoint `z(x, y)`. Every rule satisfies `z(x, x) = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasepointRule {
    #[default]
    AtX,
    AtY,
    Midpoint,
}

impl BasepointRule {
    pub fn basepoint(self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) {
            return Err(domain(format!("basepoint requires x, y > 0, got ({x}, {y})")));
        }
        Ok(match self {
            BasepointRule::AtX => x,
            BasepointRule::AtY => y,
            BasepointRule::Midpoint => 0.5 * (x + y),
        })
    }
}

impl std::str::FromStr for BasepointRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atx" | "x" => Ok(BasepointRule::AtX),
            "aty" | "y" => Ok(BasepointRule::AtY),
            "mid" | "midpoint" => Ok(BasepointRule::Midpoint),
            other => Err(domain(format!("unknown basepoint rule {other:?}"))),
        }
    }
}

//! Short-time expansion of the Green's function.
//!
//! The order-`n` kernel is assembled in rescaled coordinates around the
//! basepoint `z`: with `s = sqrt(t)`, `w = (x - z)/s` and
//! `theta = (x - y)/(a^2 s)`,
//!
//! ```text
//! G[2](x, y) = g0 * ( 1 + s * (b H1 + a a' w H2 + a^3 a' H3 / 2)
//!                       + t * (P0 + sum_i P_i(w) H_i) )
//! ```
//!
//! where `g0` is the frozen-coefficient Gaussian and `H_k` are the rescaled
//! Hermite polynomials, `d^k/dx^k g0 = H_k(theta) g0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Result};
use crate::models::{BasepointRule, CoefficientJet, Model};

/// Exponents beyond this underflow `exp` in double precision.
pub const UNDERFLOW_EXPONENT: f64 = 745.0;

/// `H_0(theta), ..., H_6(theta)` for a fixed scale `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteValues(pub [f64; 7]);

impl HermiteValues {
    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }
}

/// Rescaled Hermite polynomials satisfying `H_{k+1} = -theta H_k + H_k'/a^2`.
pub fn hermite(theta: f64, a: f64) -> Result<HermiteValues> {
    ensure_positive("a", a)?;
    Ok(HermiteValues(hermite_unchecked(theta, a)))
}

#[inline]
fn hermite_unchecked(th: f64, a: f64) -> [f64; 7] {
    let e = 1.0 / (a * a);
    let e2 = e * e;
    let e3 = e2 * e;
    let th2 = th * th;
    let th3 = th2 * th;
    let th4 = th2 * th2;
    [
        1.0,
        -th,
        th2 - e,
        -th3 + 3.0 * th * e,
        th4 - 6.0 * th2 * e + 3.0 * e2,
        -th4 * th + 10.0 * th3 * e - 15.0 * th * e2,
        th4 * th2 - 15.0 * th4 * e + 45.0 * th2 * e2 - 15.0 * e3,
    ]
}

/// Coefficients `P_0..P_6` of the second-order correction, `w = (x - z)/sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderCoefficients(pub [f64; 7]);

impl SecondOrderCoefficients {
    pub fn new(jet: &CoefficientJet, w: f64) -> Self {
        let CoefficientJet {
            a,
            da_dx: a1,
            d2a_dx2: a2,
            da_dt: adot,
            b,
            db_dx: b1,
            c,
        } = *jet;
        let a1sq = a1 * a1;
        let w2 = w * w;
        let a_2 = a * a;
        let a_3 = a_2 * a;
        let p2 = 0.5
            * (0.5 * a_3 * a2 + a_2 * b1 + 0.5 * a_2 * a1sq + b * b + a1sq * w2
                + a * (b * a1 + adot + a2 * w2));
        let p3 = a * w * (a1 * b + 0.5 * a_2 * a2 + 1.5 * a * a1sq);
        let p4 = a_2 / 3.0 * (0.5 * a_3 * a2 + 2.0 * a_2 * a1sq + 1.5 * a * a1 * b + 1.5 * a1sq * w2);
        let p5 = 0.5 * a_2 * a_2 * a1sq * w;
        let p6 = 0.125 * a_3 * a_3 * a1sq;
        Self([c, b1 * w, p2, p3, p4, p5, p6])
    }
}

#[inline]
fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("time must be > 0, got {t}")))
    }
}

/// Frozen-coefficient Gaussian `(2 pi t a^2)^(-1/2) exp(-(x-y)^2 / (2 t a^2))`.
///
/// Returns exactly 0 once the exponent passes [`UNDERFLOW_EXPONENT`].
pub fn g0(jet: &CoefficientJet, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok(gaussian(jet.a, t, x - y))
}

#[inline]
fn gaussian(a: f64, t: f64, d: f64) -> f64 {
    let var = a * a * t;
    let q = d * d / (2.0 * var);
    if q > UNDERFLOW_EXPONENT {
        0.0
    } else {
        (-q).exp() / (2.0 * PI * var).sqrt()
    }
}

/// Kernel of order 0, 1 or 2 with the jet taken at basepoint `z`.
#[inline]
pub(crate) fn expansion(jet: &CoefficientJet, order: u8, t: f64, x: f64, y: f64, z: f64) -> f64 {
    let a = jet.a;
    let g = gaussian(a, t, x - y);
    if order == 0 || g == 0.0 {
        return g;
    }
    let s = t.sqrt();
    let theta = (x - y) / (a * a * s);
    let w = (x - z) / s;
    let h = hermite_unchecked(theta, a);
    let first = jet.b * h[1] + a * jet.da_dx * w * h[2] + 0.5 * a * a * a * jet.da_dx * h[3];
    let mut bracket = 1.0 + s * first;
    if order >= 2 {
        let p = SecondOrderCoefficients::new(jet, w).0;
        let second = p[0] + (1..7).map(|k| p[k] * h[k]).sum::<f64>();
        bracket += t * second;
    }
    g * bracket
}

/// First-order kernel at an arbitrary basepoint `z` (jet evaluated at `z`).
pub fn g1_general(jet: &CoefficientJet, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
    check_time(t)?;
    Ok(expansion(jet, 1, t, x, y, z))
}

/// Second-order kernel at an arbitrary basepoint `z` (jet evaluated at `z`).
pub fn g2_general(jet: &CoefficientJet, t: f64, x: f64, y: f64, z: f64) -> Result<f64> {
    check_time(t)?;
    Ok(expansion(jet, 2, t, x, y, z))
}

/// First-order kernel for `z = x` in its expanded polynomial form.
pub fn g1_diagonal(jet: &CoefficientJet, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    let CoefficientJet { a, da_dx, b, .. } = *jet;
    let d = x - y;
    let g = gaussian(a, t, d);
    Ok(g * (1.0 + (3.0 * a * da_dx - 2.0 * b) / (2.0 * a * a) * d
        - da_dx / (2.0 * a * a * a * t) * d * d * d))
}

/// Second-order kernel for `z = x`, where only `H_2`, `H_4`, `H_6` and the
/// constant survive.
pub fn g2_diagonal(jet: &CoefficientJet, t: f64, x: f64, y: f64) -> Result<f64> {
    let first = g1_diagonal(jet, t, x, y)?;
    let CoefficientJet {
        a,
        da_dx: a1,
        d2a_dx2: a2,
        da_dt: adot,
        b,
        db_dx: b1,
        c,
    } = *jet;
    let d = x - y;
    let xi = d / (a * a * t.sqrt());
    let h = hermite_unchecked(xi, a);
    let p6 = a.powi(6) * a1 * a1 / 8.0;
    let p4 = a.powi(3) / 6.0 * (a * a * a2 + 4.0 * a * a1 * a1 + 3.0 * b * a1);
    let p2 = 0.25
        * (a.powi(3) * a2 + 2.0 * a * a * b1 + 2.0 * a * adot + 2.0 * a * a1 * b
            + a1 * a1 * a * a
            + 2.0 * b * b);
    let g = gaussian(a, t, d);
    Ok(first + t * g * (p6 * h[6] + p4 * h[4] + p2 * h[2] + c))
}

/// Identifies one approximate Green's function: model, expansion order and
/// basepoint rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub model: Model,
    pub order: u8,
    pub basepoint: BasepointRule,
}

impl KernelSpec {
    pub fn new(model: Model, order: u8, basepoint: BasepointRule) -> Result<Self> {
        if order > 2 {
            return Err(domain(format!("kernel order must be 0, 1 or 2, got {order}")));
        }
        Ok(Self {
            model,
            order,
            basepoint,
        })
    }

    /// `G[n]_t(x, y)` with `z = basepoint(x, y)` and the jet taken at `z`.
    pub fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_time(t)?;
        let z = self.basepoint.basepoint(x, y)?;
        let jet = self.model.jet(z)?;
        Ok(expansion(&jet, self.order, t, x, y, z))
    }
}

pub fn kernel_eval(spec: &KernelSpec, t: f64, x: f64, y: f64) -> Result<f64> {
    spec.eval(t, x, y)
}

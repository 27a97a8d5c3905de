//! Reference prices: exact Black-Scholes, the Hagan-Woodward CEV
//! approximation and a Crank-Nicolson solver for arbitrary models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::grid::SpatialGrid;
use crate::models::Model;
use crate::pricing::{Payoff, PriceCurve};
use crate::special::{norm_cdf, norm_pdf};

fn d1_d2(t: f64, k: f64, x: f64, sigma: f64, r: f64) -> Result<(f64, f64)> {
    ensure_positive("t", t)?;
    ensure_positive("strike", k)?;
    ensure_positive("x", x)?;
    ensure_positive("sigma", sigma)?;
    if !r.is_finite() {
        return Err(domain(format!("r must be finite, got {r}")));
    }
    let sd = sigma * t.sqrt();
    let d1 = ((x / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    Ok((d1, d1 - sd))
}

/// Black-Scholes call `x N(d1) - K e^{-rt} N(d2)`.
pub fn bs_exact(t: f64, k: f64, x: f64, sigma: f64, r: f64) -> Result<f64> {
    let (d1, d2) = d1_d2(t, k, x, sigma, r)?;
    Ok(x * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2))
}

pub fn bs_delta(t: f64, k: f64, x: f64, sigma: f64, r: f64) -> Result<f64> {
    let (d1, _) = d1_d2(t, k, x, sigma, r)?;
    Ok(norm_cdf(d1))
}

pub fn bs_gamma(t: f64, k: f64, x: f64, sigma: f64, r: f64) -> Result<f64> {
    let (d1, _) = d1_d2(t, k, x, sigma, r)?;
    Ok(norm_pdf(d1) / (x * sigma * t.sqrt()))
}

/// Discounted lognormal transition density of the Black-Scholes model.
pub fn bs_kernel(t: f64, x: f64, y: f64, sigma: f64, r: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let var = sigma * sigma * t;
    let m = (y / x).ln() - (r - 0.5 * sigma * sigma) * t;
    (-r * t).exp() * (-m * m / (2.0 * var)).exp() / (y * (2.0 * PI * var).sqrt())
}

/// Implied Black volatility of a CEV model `a = sigma x^beta` in the
/// Hagan-Woodward approximation.
pub fn hagan_woodward_vol(t: f64, k: f64, s0: f64, sigma: f64, beta: f64, r: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    ensure_positive("strike", k)?;
    ensure_positive("s0", s0)?;
    ensure_positive("sigma", sigma)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta must lie in (0, 1], got {beta}")));
    }
    let q = 2.0 * r * (1.0 - beta) * t;
    // (e^q - 1)/q -> 1 as q -> 0
    let growth = if q.abs() < 1e-12 { 1.0 } else { q.exp_m1() / q };
    let a = sigma * growth.sqrt();
    let fwd = (r * t).exp() * s0;
    let f = 0.5 * (fwd + k);
    let one_b = 1.0 - beta;
    let moneyness = (fwd - k) / f;
    Ok(a / f.powf(one_b)
        * (1.0
            + one_b * (2.0 + beta) / 24.0 * moneyness * moneyness
            + one_b * one_b * a * a * t / (24.0 * f.powf(2.0 * one_b))))
}

pub fn hagan_woodward_price(t: f64, k: f64, s0: f64, sigma: f64, beta: f64, r: f64) -> Result<f64> {
    let vol = hagan_woodward_vol(t, k, s0, sigma, beta, r)?;
    bs_exact(t, k, s0, vol, r)
}

/// Crank-Nicolson run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CNConfig {
    pub grid: SpatialGrid,
    pub dt: f64,
    pub t_total: f64,
}

impl CNConfig {
    pub fn new(grid: SpatialGrid, dt: f64, t_total: f64) -> Result<Self> {
        ensure_positive("dt", dt)?;
        ensure_positive("t_total", t_total)?;
        if dt > t_total {
            return Err(domain(format!("dt = {dt} exceeds t_total = {t_total}")));
        }
        Ok(Self { grid, dt, t_total })
    }

    pub fn steps(&self) -> usize {
        (self.t_total / self.dt).round().max(1.0) as usize
    }

    pub fn refined(&self) -> Self {
        Self {
            grid: self.grid.refined(),
            dt: 0.5 * self.dt,
            ..*self
        }
    }
}

/// Implicit half-steps used to damp the payoff kink before Crank-Nicolson.
const RANNACHER_HALF_STEPS: usize = 4;

/// Solves the tridiagonal system `sub[i] u[i-1] + diag[i] u[i] + sup[i] u[i+1] = rhs[i]`,
/// leaving the solution in `rhs`.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1].abs() < 1e-300 {
            return Err(Error::SingularMatrix(i - 1));
        }
        let m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if diag[n - 1].abs() < 1e-300 {
        return Err(Error::SingularMatrix(n - 1));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

/// Space-discretized operator at one time level, rows for nodes `1..=N-1`.
/// The last row folds in `u_N = 2 u_{N-1} - u_{N-2}`.
struct Operator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

struct Coefficients {
    a0: Vec<f64>,
    a_dot: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Coefficients {
    fn operator(&self, tau: f64, dx: f64) -> Operator {
        let m = self.a0.len();
        let mut op = Operator {
            sub: vec![0.0; m],
            diag: vec![0.0; m],
            sup: vec![0.0; m],
        };
        for i in 0..m {
            let a = self.a0[i] + tau * self.a_dot[i];
            let diff = 0.5 * a * a / (dx * dx);
            let adv = self.b[i] / (2.0 * dx);
            if i + 1 < m {
                op.sub[i] = diff - adv;
                op.diag[i] = -2.0 * diff + self.c[i];
                op.sup[i] = diff + adv;
            } else {
                op.sub[i] = -2.0 * adv;
                op.diag[i] = 2.0 * adv + self.c[i];
            }
        }
        op
    }
}

/// `u_t = a^2/2 u_xx + b u_x + c u` on the grid, from `u(0) = payoff`.
///
/// Left boundary: `h(x_min) e^{c t}`. Right boundary: zero second derivative.
/// Four implicit Euler half-steps precede the Crank-Nicolson steps.
pub fn cn_solve(model: &Model, config: &CNConfig, payoff: &Payoff) -> Result<PriceCurve> {
    let grid = config.grid;
    let xs = grid.nodes();
    let n = xs.len() - 1;
    if n < 3 {
        return Err(domain("Crank-Nicolson needs at least four grid nodes"));
    }
    let mut coef = Coefficients {
        a0: Vec::with_capacity(n - 1),
        a_dot: Vec::with_capacity(n - 1),
        b: Vec::with_capacity(n - 1),
        c: Vec::with_capacity(n - 1),
    };
    for &x in &xs[1..n] {
        let j = model.jet(x)?;
        coef.a0.push(j.a);
        coef.a_dot.push(j.da_dt);
        coef.b.push(j.b);
        coef.c.push(j.c);
    }
    let left_jet = model.jet(xs[0])?;
    let left = |tau: f64| payoff.eval(xs[0]) * (left_jet.c * tau).exp();

    let mut u: Vec<f64> = xs[1..n].iter().map(|&x| payoff.eval(x)).collect();
    let steps = config.steps();
    let dt = config.t_total / steps as f64;
    let mut schedule = vec![(0.5 * dt, 1.0); RANNACHER_HALF_STEPS.min(2 * steps)];
    schedule.extend(std::iter::repeat_n((dt, 0.5), steps.saturating_sub(RANNACHER_HALF_STEPS / 2)));

    let dx = grid.dx;
    let mut tau = 0.0;
    let mut op_now = coef.operator(tau, dx);
    let mut rhs = vec![0.0; n - 1];
    for (h, theta) in schedule {
        let next = tau + h;
        let op_next = coef.operator(next, dx);
        let explicit = (1.0 - theta) * h;
        for i in 0..n - 1 {
            let mut lu = op_now.diag[i] * u[i];
            if i > 0 {
                lu += op_now.sub[i] * u[i - 1];
            }
            if i + 1 < n - 1 {
                lu += op_now.sup[i] * u[i + 1];
            }
            rhs[i] = u[i] + explicit * lu;
        }
        rhs[0] += explicit * op_now.sub[0] * left(tau) + theta * h * op_next.sub[0] * left(next);
        let mut sub: Vec<f64> = op_next.sub.iter().map(|v| -theta * h * v).collect();
        let mut diag: Vec<f64> = op_next.diag.iter().map(|v| 1.0 - theta * h * v).collect();
        let sup: Vec<f64> = op_next.sup.iter().map(|v| -theta * h * v).collect();
        sub[0] = 0.0;
        thomas(&sub, &mut diag, &sup, &mut rhs)?;
        u.copy_from_slice(&rhs);
        op_now = op_next;
        tau = next;
    }

    let mut values = Vec::with_capacity(n + 1);
    values.push(left(tau));
    values.extend_from_slice(&u);
    values.push(2.0 * u[n - 2] - u[n - 3]);
    PriceCurve::new(xs, values)
}

/// Largest difference at shared nodes between the `(dx, dt)` run and the
/// `(dx/2, dt/2)` run.
pub fn cn_richardson_defect(model: &Model, config: &CNConfig, payoff: &Payoff) -> Result<f64> {
    let coarse = cn_solve(model, config, payoff)?;
    let fine = cn_solve(model, &config.refined(), payoff)?;
    Ok(coarse
        .value
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine.value[2 * i]).abs())
        .fold(0.0, f64::max))
}

/// Source of reference values for error tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    BsExact,
    HaganWoodward,
    Cn,
}

impl std::str::FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bs-exact" => Ok(OracleKind::BsExact),
            "hagan-woodward" => Ok(OracleKind::HaganWoodward),
            "cn" => Ok(OracleKind::Cn),
            other => Err(domain(format!("unknown oracle {other:?}"))),
        }
    }
}

/// Default Crank-Nicolson time step for oracle runs at maturity `t`.
pub fn default_cn_dt(t: f64) -> f64 {
    (t / 20.0).min(1e-3)
}

/// Reference values at `xs`.
///
/// The analytic oracles price call, put and butterfly payoffs leg by leg;
/// Crank-Nicolson runs on `grid` and is interpolated linearly onto `xs`.
pub fn oracle_curve(
    kind: OracleKind,
    model: &Model,
    t: f64,
    payoff: &Payoff,
    grid: &SpatialGrid,
    xs: &[f64],
) -> Result<PriceCurve> {
    let analytic = |call: &dyn Fn(f64, f64) -> Result<f64>, r: f64| -> Result<PriceCurve> {
        let values = xs
            .iter()
            .map(|&x| match payoff {
                Payoff::Put { strike } => Ok(call(*strike, x)? - x + strike * (-r * t).exp()),
                other => other
                    .call_legs()
                    .ok_or_else(|| domain("analytic oracles need a call, put or butterfly payoff"))?
                    .iter()
                    .map(|&(w, k)| Ok(w * call(k, x)?))
                    .sum(),
            })
            .collect::<Result<Vec<_>>>()?;
        PriceCurve::new(xs.to_vec(), values)
    };
    match (kind, model) {
        (OracleKind::BsExact, Model::Bsm { sigma, r })
        | (OracleKind::BsExact, Model::Cev { sigma, r, alpha: 1.0 }) => {
            analytic(&|k, x| bs_exact(t, k, x, *sigma, *r), *r)
        }
        (OracleKind::BsExact, _) => Err(domain("bs-exact oracle needs a constant-volatility BSM model")),
        (OracleKind::HaganWoodward, Model::Cev { sigma, alpha, r }) => {
            analytic(&|k, x| hagan_woodward_price(t, k, x, *sigma, *alpha, *r), *r)
        }
        (OracleKind::HaganWoodward, _) => Err(domain("hagan-woodward oracle needs a CEV model")),
        (OracleKind::Cn, _) => {
            let curve = cn_solve(model, &CNConfig::new(*grid, default_cn_dt(t), t)?, payoff)?;
            let sampled = Payoff::sampled(*grid, curve.value)?;
            PriceCurve::new(xs.to_vec(), xs.iter().map(|&x| sampled.eval(x)).collect())
        }
    }
}

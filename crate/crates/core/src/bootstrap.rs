//! Long maturities by composing the short-time kernel: `e^{tL} ~ (G_{t/n})^n`.
//!
//! Each step is a dense Simpson convolution over the grid, evaluated in
//! parallel over output nodes. Every node sums its row in the same order, so
//! results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::grid::SpatialGrid;
use crate::kernel::{expansion, KernelSpec, UNDERFLOW_EXPONENT};
use crate::models::{BasepointRule, CoefficientJet};
use crate::oracles::{oracle_curve, OracleKind};
use crate::pricing::{price_closed, Payoff, PriceCurve};

/// Kernel-mass tolerance per step.
pub const MASS_TOLERANCE: f64 = 1e-4;

/// Step sizes above this are allowed but warned about.
pub const LARGE_STEP_WARNING: f64 = 0.4;

/// How the first step from the payoff is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstHop {
    /// Closed form when the payoff and basepoint allow it, quadrature otherwise.
    #[default]
    Auto,
    Closed,
    Quadrature,
}

impl std::str::FromStr for FirstHop {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(FirstHop::Auto),
            "closed" => Ok(FirstHop::Closed),
            "quadrature" => Ok(FirstHop::Quadrature),
            other => Err(domain(format!("unknown first-hop mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub spec: KernelSpec,
    pub t_total: f64,
    pub n_steps: usize,
    pub grid: SpatialGrid,
    #[serde(default)]
    pub first_hop: FirstHop,
}

impl BootstrapConfig {
    pub fn new(spec: KernelSpec, t_total: f64, n_steps: usize, grid: SpatialGrid) -> Result<Self> {
        ensure_positive("t_total", t_total)?;
        if n_steps == 0 {
            return Err(domain("n_steps must be >= 1"));
        }
        Ok(Self {
            spec,
            t_total,
            n_steps,
            grid,
            first_hop: FirstHop::Auto,
        })
    }

    pub fn with_first_hop(mut self, first_hop: FirstHop) -> Self {
        self.first_hop = first_hop;
        self
    }

    pub fn step(&self) -> f64 {
        self.t_total / self.n_steps as f64
    }

    fn closed_first_hop(&self, payoff: &Payoff) -> Result<bool> {
        let available = self.spec.basepoint == BasepointRule::AtX
            && matches!(self.spec.order, 1 | 2)
            && !matches!(payoff, Payoff::Sampled { .. });
        match self.first_hop {
            FirstHop::Auto => Ok(available),
            FirstHop::Quadrature => Ok(false),
            FirstHop::Closed if available => Ok(true),
            FirstHop::Closed => Err(domain(
                "closed first hop needs basepoint z = x, order 1 or 2 and a call, put or butterfly",
            )),
        }
    }
}

/// Per-node jets for the basepoint rules that allow precomputation.
enum Jets {
    PerNode(Vec<CoefficientJet>),
    Midpoint,
}

struct Engine<'a> {
    spec: &'a KernelSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    jets: Jets,
    tau: f64,
}

impl<'a> Engine<'a> {
    fn new(spec: &'a KernelSpec, grid: &SpatialGrid, tau: f64) -> Result<Self> {
        let nodes = grid.nodes();
        let jets = match spec.basepoint {
            BasepointRule::AtX | BasepointRule::AtY => {
                Jets::PerNode(nodes.iter().map(|&x| spec.model.jet(x)).collect::<Result<_>>()?)
            }
            BasepointRule::Midpoint => Jets::Midpoint,
        };
        Ok(Self {
            spec,
            weights: grid.simpson_weights(),
            nodes,
            jets,
            tau,
        })
    }

    /// `(sum_j w_j G(x_i, y_j) u_j, sum_j w_j G(x_i, y_j))`.
    fn row(&self, i: usize, u: &[f64]) -> Result<(f64, f64)> {
        let x = self.nodes[i];
        let order = self.spec.order;
        let (mut value, mut mass) = (0.0, 0.0);
        match (&self.jets, self.spec.basepoint) {
            (Jets::PerNode(jets), BasepointRule::AtX) => {
                let jet = &jets[i];
                let reach = (2.0 * UNDERFLOW_EXPONENT).sqrt() * jet.a * self.tau.sqrt();
                let dx = self.nodes[1] - self.nodes[0];
                let lo = ((x - reach - self.nodes[0]) / dx).floor().max(0.0) as usize;
                let hi = (((x + reach - self.nodes[0]) / dx).ceil() as usize).min(self.nodes.len() - 1);
                for j in lo..=hi {
                    let g = self.weights[j] * expansion(jet, order, self.tau, x, self.nodes[j], x);
                    value += g * u[j];
                    mass += g;
                }
            }
            (Jets::PerNode(jets), _) => {
                for (j, &y) in self.nodes.iter().enumerate() {
                    let g = self.weights[j] * expansion(&jets[j], order, self.tau, x, y, y);
                    value += g * u[j];
                    mass += g;
                }
            }
            (Jets::Midpoint, _) => {
                for (j, &y) in self.nodes.iter().enumerate() {
                    let z = 0.5 * (x + y);
                    let jet = self.spec.model.jet(z)?;
                    let g = self.weights[j] * expansion(&jet, order, self.tau, x, y, z);
                    value += g * u[j];
                    mass += g;
                }
            }
        }
        Ok((value, mass))
    }

    fn step(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let rows = (0..self.nodes.len())
            .into_par_iter()
            .map(|i| self.row(i, u))
            .collect::<Result<Vec<_>>>()?;
        Ok(rows.into_iter().unzip())
    }

    /// Flags nodes whose discrete kernel mass misses `1 + c tau`.
    ///
    /// Only rows that carry value and whose kernel lies well inside the grid
    /// are checked; the identity is exact only for the basepoint `z = x`.
    fn check_mass(&self, u: &[f64], mass: &[f64]) -> Result<()> {
        let Jets::PerNode(jets) = &self.jets else { return Ok(()) };
        if self.spec.basepoint != BasepointRule::AtX {
            return Ok(());
        }
        let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (first, last) = (self.nodes[0], *self.nodes.last().unwrap());
        for (i, &x) in self.nodes.iter().enumerate() {
            let jet = &jets[i];
            let sd = jet.a * self.tau.sqrt();
            if u[i].abs() <= 1e-6 * scale || x - 6.0 * sd < first || x + 6.0 * sd > last {
                continue;
            }
            let expected = if self.spec.order == 2 { 1.0 + jet.c * self.tau } else { 1.0 };
            let miss = (mass[i] - expected).abs();
            if miss > MASS_TOLERANCE {
                return Err(Error::GridTooCoarse(format!(
                    "kernel mass {:.6} at x = {x} deviates from {expected:.6} (dx = {}, kernel width {sd:.4})",
                    mass[i],
                    self.nodes[1] - self.nodes[0]
                )));
            }
        }
        Ok(())
    }
}

/// Values of `(G_{t/n})^n h` at every grid node.
pub fn bootstrap_solve(config: &BootstrapConfig, payoff: &Payoff) -> Result<PriceCurve> {
    let tau = config.step();
    if tau > LARGE_STEP_WARNING {
        log::warn!(
            "bootstrap step t/n = {tau:.3} is large; {} steps may not control the error at t = {}",
            config.n_steps,
            config.t_total
        );
    }
    let engine = Engine::new(&config.spec, &config.grid, tau)?;
    let mut u: Vec<f64> = engine.nodes.iter().map(|&y| payoff.eval(y)).collect();
    let mut remaining = config.n_steps;
    if config.closed_first_hop(payoff)? {
        u = engine
            .nodes
            .par_iter()
            .map(|&x| price_closed(config.spec.order, &config.spec.model, tau, payoff, x))
            .collect::<Result<_>>()?;
        remaining -= 1;
    }
    for _ in 0..remaining {
        let (next, mass) = engine.step(&u)?;
        engine.check_mass(&u, &mass)?;
        u = next;
    }
    PriceCurve::new(engine.nodes, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub t: f64,
    pub error: f64,
}

/// Sup-norm bootstrap error on `[window.0, window.1]` for each maturity.
pub fn bootstrap_error_table(
    config: &BootstrapConfig,
    payoff: &Payoff,
    times: &[f64],
    oracle: OracleKind,
    window: (f64, f64),
) -> Result<Vec<ErrorRow>> {
    times
        .iter()
        .map(|&t| {
            let cfg = BootstrapConfig {
                t_total: t,
                ..config.clone()
            };
            let curve = bootstrap_solve(&cfg, payoff)?;
            let reference = oracle_curve(oracle, &config.spec.model, t, payoff, &config.grid, &curve.x)?;
            let error = curve
                .iter()
                .zip(reference.value.iter())
                .filter(|((x, _), _)| *x >= window.0 && *x <= window.1)
                .map(|((_, v), r)| (v - r).abs())
                .fold(0.0, f64::max);
            Ok(ErrorRow { t, error })
        })
        .collect()
}

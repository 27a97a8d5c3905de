//! Short-time asymptotic Green's functions for one-factor local-volatility
//! models, with closed-form and bootstrapped option prices.

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod models;
pub mod oracles;
pub mod pricing;
pub mod special;

pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use kernel::{kernel_eval, KernelSpec};
pub use models::{BasepointRule, CoefficientJet, Model};
pub use pricing::{Payoff, PriceCurve};

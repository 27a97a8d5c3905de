//! European option values from the approximate kernels.
//!
//! With the basepoint at `z = x` the kernel is a polynomial times a Gaussian
//! and call prices integrate in closed form through `erf`. Every other
//! combination of basepoint and payoff goes through Simpson quadrature on a
//! [`SpatialGrid`].

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::grid::{simpson_weights, SpatialGrid};
use crate::kernel::{expansion, KernelSpec};
use crate::models::{BasepointRule, CoefficientJet, Model};
use crate::special::erf;

/// Terminal condition `h(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Hat vanishing outside `[k1, k2]` with its peak `k - k1` at `k`.
    Butterfly { k1: f64, k: f64, k2: f64 },
    /// Values on grid nodes, linearly interpolated and zero off the grid.
    Sampled { grid: SpatialGrid, values: Vec<f64> },
}

impl Payoff {
    pub fn call(strike: f64) -> Result<Self> {
        Payoff::Call { strike }.validated()
    }

    pub fn put(strike: f64) -> Result<Self> {
        Payoff::Put { strike }.validated()
    }

    pub fn butterfly(k1: f64, k: f64, k2: f64) -> Result<Self> {
        Payoff::Butterfly { k1, k, k2 }.validated()
    }

    pub fn sampled(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        Payoff::Sampled { grid, values }.validated()
    }

    /// Samples `f` on every node of `grid`.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect();
        Payoff::sampled(grid, values)
    }

    pub fn validated(self) -> Result<Self> {
        match &self {
            Payoff::Call { strike } | Payoff::Put { strike } => ensure_positive("strike", *strike)?,
            Payoff::Butterfly { k1, k, k2 } => {
                ensure_positive("k1", *k1)?;
                if !(k1 < k && k < k2 && k2.is_finite()) {
                    return Err(domain(format!(
                        "butterfly strikes must satisfy k1 < k < k2, got {k1}, {k}, {k2}"
                    )));
                }
            }
            Payoff::Sampled { grid, values } => {
                if values.len() != grid.len() {
                    return Err(domain(format!(
                        "sampled payoff has {} values for {} grid nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(domain("sampled payoff contains non-finite values"));
                }
            }
        }
        Ok(self)
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (y - strike).max(0.0),
            Payoff::Put { strike } => (strike - y).max(0.0),
            Payoff::Butterfly { k1, k, k2 } => {
                if y <= *k1 || y >= *k2 {
                    0.0
                } else if y <= *k {
                    y - k1
                } else {
                    (k - k1) * (k2 - y) / (k2 - k)
                }
            }
            Payoff::Sampled { grid, values } => {
                if !grid.contains(y) {
                    return 0.0;
                }
                let s = (y - grid.x_min) / grid.dx;
                let i = (s.floor() as usize).min(values.len() - 2);
                let f = s - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    /// Decomposition into weighted calls `sum w_i (y - K_i)^+`, when one exists.
    pub fn call_legs(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            Payoff::Call { strike } => Some(vec![(1.0, strike)]),
            Payoff::Butterfly { k1, k, k2 } => Some(vec![
                (1.0, k1),
                (-(k2 - k1) / (k2 - k), k),
                ((k - k1) / (k2 - k), k2),
            ]),
            _ => None,
        }
    }

    /// Points where the payoff has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Payoff::Call { strike } | Payoff::Put { strike } => vec![strike],
            Payoff::Butterfly { k1, k, k2 } => vec![k1, k, k2],
            Payoff::Sampled { .. } => Vec::new(),
        }
    }
}

/// Ordered `(x, value)` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceCurve {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
}

impl PriceCurve {
    pub fn new(x: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if x.len() != value.len() {
            return Err(domain("curve abscissae and values differ in length"));
        }
        if x.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(domain("curve abscissae must be strictly increasing"));
        }
        if let Some(i) = value.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("non-finite value at x = {}", x[i])));
        }
        Ok(Self { x, value })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.value.iter().copied())
    }

    /// Largest `|value - oracle(x)|` over nodes in `[lo, hi]`.
    pub fn max_abs_error(&self, lo: f64, hi: f64, oracle: impl Fn(f64) -> f64) -> f64 {
        self.iter()
            .filter(|&(x, _)| x >= lo && x <= hi)
            .map(|(x, v)| (v - oracle(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Central-difference delta and gamma at interior nodes; needs uniform spacing.
    pub fn greeks(&self) -> Vec<(f64, Greeks)> {
        (1..self.len().saturating_sub(1))
            .map(|i| {
                let h = self.x[i + 1] - self.x[i];
                let (lo, mid, hi) = (self.value[i - 1], self.value[i], self.value[i + 1]);
                (
                    self.x[i],
                    Greeks {
                        delta: (hi - lo) / (2.0 * h),
                        gamma: (hi + lo - 2.0 * mid) / (h * h),
                    },
                )
            })
            .collect()
    }

    /// CSV with header `x,price`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,price\n");
        for (x, v) in self.iter() {
            writeln!(out, "{},{}", fmt17(x), fmt17(v)).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Greeks {
    pub delta: f64,
    pub gamma: f64,
}

/// Central finite differences of `price` at `x`.
pub fn greeks(price: impl Fn(f64) -> Result<f64>, x: f64, dx: f64) -> Result<Greeks> {
    ensure_positive("dx", dx)?;
    if x - dx <= 0.0 {
        return Err(domain(format!("greeks need x - dx > 0, got x = {x}, dx = {dx}")));
    }
    let (lo, mid, hi) = (price(x - dx)?, price(x)?, price(x + dx)?);
    Ok(Greeks {
        delta: (hi - lo) / (2.0 * dx),
        gamma: (hi + lo - 2.0 * mid) / (dx * dx),
    })
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("time must be > 0, got {t}")))
    }
}

fn check_order(order: u8) -> Result<()> {
    if order == 1 || order == 2 {
        Ok(())
    } else {
        Err(domain(format!("order must be 1 or 2, got {order}")))
    }
}

/// Call value from the jet at `z = x`, integrating over `(K, inf)`.
pub fn call_from_jet(jet: &CoefficientJet, order: u8, t: f64, k: f64, x: f64) -> f64 {
    let CoefficientJet { a, da_dx: a1, b, c, .. } = *jet;
    let d = x - k;
    let s = t.sqrt();
    let e = (-d * d / (2.0 * a * a * t)).exp();
    let cdf = 0.5 * (erf(d / (a * (2.0 * t).sqrt())) + 1.0);
    let first = s / (2.0 * (2.0 * PI).sqrt()) * e * (2.0 * a - a1 * d) + cdf * (b * t + d);
    if order < 2 {
        return first;
    }
    let p = crate::kernel::SecondOrderCoefficients::new(jet, 0.0).0;
    let g = e / ((2.0 * PI).sqrt() * a);
    let theta = d / (a * a * s);
    let inv = 1.0 / (a * a);
    let h2 = theta * theta - inv;
    let h4 = theta.powi(4) - 6.0 * theta * theta * inv + 3.0 * inv * inv;
    first + c * t * (d * cdf + s * a * a * g) + t * s * g * (p[2] + p[4] * h2 + p[6] * h4)
}

/// `U[1]` or `U[2]` for a call, basepoint `z = x`.
pub fn price_call_closed(order: u8, model: &Model, t: f64, k: f64, x: f64) -> Result<f64> {
    check_order(order)?;
    check_time(t)?;
    ensure_positive("strike", k)?;
    let jet = model.jet(x)?;
    Ok(call_from_jet(&jet, order, t, k, x))
}

/// First-order CEV call in its explicit form.
pub fn price_call_cev_closed(t: f64, k: f64, x: f64, sigma: f64, alpha: f64, r: f64) -> Result<f64> {
    check_time(t)?;
    ensure_positive("strike", k)?;
    ensure_positive("x", x)?;
    ensure_positive("sigma", sigma)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let d = x - k;
    let xa = x.powf(alpha);
    let gauss = (-d * d / (2.0 * sigma * sigma * t * xa * xa)).exp();
    Ok(sigma * x.powf(alpha - 1.0) * t.sqrt() / (2.0 * (2.0 * PI).sqrt())
        * gauss
        * ((2.0 - alpha) * x + alpha * k)
        + 0.5 * (erf(d / ((2.0 * t).sqrt() * sigma * xa)) + 1.0) * ((1.0 + r * t) * x - k))
}

/// `int G[n](x, y) (y - K) dy` over the real line, basepoint `z = x`.
pub fn forward_from_jet(jet: &CoefficientJet, order: u8, t: f64, k: f64, x: f64) -> f64 {
    match order {
        0 => x - k,
        1 => x + jet.b * t - k,
        _ => x + jet.b * t + jet.c * x * t - k * (1.0 + jet.c * t),
    }
}

/// Put value by parity against the kernel's own forward.
pub fn price_put(order: u8, model: &Model, t: f64, k: f64, x: f64) -> Result<f64> {
    let call = price_call_closed(order, model, t, k, x)?;
    let jet = model.jet(x)?;
    Ok(call - forward_from_jet(&jet, order, t, k, x))
}

/// Closed-form value of any call, put or butterfly payoff at `z = x`.
pub fn price_closed(order: u8, model: &Model, t: f64, payoff: &Payoff, x: f64) -> Result<f64> {
    check_order(order)?;
    check_time(t)?;
    let jet = model.jet(x)?;
    match payoff {
        Payoff::Put { strike } => {
            Ok(call_from_jet(&jet, order, t, *strike, x) - forward_from_jet(&jet, order, t, *strike, x))
        }
        other => {
            let legs = other
                .call_legs()
                .ok_or_else(|| domain("no closed form for sampled payoffs"))?;
            Ok(legs
                .iter()
                .map(|&(w, k)| w * call_from_jet(&jet, order, t, k, x))
                .sum())
        }
    }
}

/// Simpson quadrature of `int G(x, y) h(y) dy` over `[grid.x_min, grid.x_max]`.
///
/// The range is split at the payoff's kinks; each piece uses the smallest even
/// panel count with width at most `grid.dx`.
pub fn price_quadrature(spec: &KernelSpec, t: f64, payoff: &Payoff, x: f64, grid: &SpatialGrid) -> Result<f64> {
    check_time(t)?;
    let mut cuts = vec![grid.x_min];
    cuts.extend(
        payoff
            .breakpoints()
            .into_iter()
            .filter(|&k| k > grid.x_min && k < grid.x_max),
    );
    cuts.push(grid.x_max);
    let fixed_jet = match spec.basepoint {
        BasepointRule::AtX => Some(spec.model.jet(x)?),
        _ => None,
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut n = ((hi - lo) / grid.dx - 1e-9).ceil().max(2.0) as usize;
        n += n % 2;
        let h = (hi - lo) / n as f64;
        for (i, wt) in simpson_weights(n, h).into_iter().enumerate() {
            let y = lo + i as f64 * h;
            let hy = payoff.eval(y);
            if hy == 0.0 {
                continue;
            }
            let g = match fixed_jet {
                Some(ref jet) => expansion(jet, spec.order, t, x, y, x),
                None => {
                    let z = spec.basepoint.basepoint(x, y)?;
                    expansion(&spec.model.jet(z)?, spec.order, t, x, y, z)
                }
            };
            total += wt * g * hy;
        }
    }
    Ok(total)
}

/// Quadrature value with a half-step Richardson defect estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub defect: f64,
}

/// [`price_quadrature`] on `grid` and on its refinement; warns when they
/// differ by more than `1e-6 (1 + |value|)`.
pub fn price_quadrature_checked(
    spec: &KernelSpec,
    t: f64,
    payoff: &Payoff,
    x: f64,
    grid: &SpatialGrid,
) -> Result<QuadratureEstimate> {
    let coarse = price_quadrature(spec, t, payoff, x, grid)?;
    let fine = price_quadrature(spec, t, payoff, x, &grid.refined())?;
    let defect = (fine - coarse).abs();
    if defect > 1e-6 * (1.0 + fine.abs()) {
        log::warn!(
            "{}",
            Error::GridTooCoarse(format!("quadrature defect {defect:.3e} at x = {x} (dx = {})", grid.dx))
        );
    }
    Ok(QuadratureEstimate { value: fine, defect })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingMethod {
    Closed,
    Quadrature,
}

impl std::str::FromStr for PricingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(PricingMethod::Closed),
            "quadrature" => Ok(PricingMethod::Quadrature),
            other => Err(domain(format!("unknown pricing method {other:?}"))),
        }
    }
}

/// One pricing problem: kernel, time to expiry and payoff.
#[derive(Debug, Clone)]
pub struct PriceRequest {
    pub spec: KernelSpec,
    pub t: f64,
    pub payoff: Payoff,
}

impl PriceRequest {
    pub fn new(spec: KernelSpec, t: f64, payoff: Payoff) -> Result<Self> {
        check_time(t)?;
        Ok(Self { spec, t, payoff })
    }

    pub fn closed(&self, x: f64) -> Result<f64> {
        if self.spec.basepoint != BasepointRule::AtX {
            return Err(domain("closed-form prices require the basepoint z = x"));
        }
        price_closed(self.spec.order, &self.spec.model, self.t, &self.payoff, x)
    }

    pub fn quadrature(&self, x: f64, grid: &SpatialGrid) -> Result<f64> {
        price_quadrature(&self.spec, self.t, &self.payoff, x, grid)
    }

    pub fn at(&self, x: f64, method: PricingMethod, grid: &SpatialGrid) -> Result<f64> {
        match method {
            PricingMethod::Closed => self.closed(x),
            PricingMethod::Quadrature => self.quadrature(x, grid),
        }
    }

    /// Prices at every `xs`, in parallel.
    pub fn curve(&self, xs: &[f64], method: PricingMethod, grid: &SpatialGrid) -> Result<PriceCurve> {
        let values = xs
            .par_iter()
            .map(|&x| self.at(x, method, grid))
            .collect::<Result<Vec<_>>>()?;
        PriceCurve::new(xs.to_vec(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsm0() -> Model {
        Model::bsm(0.3, 0.0).unwrap()
    }

    #[test]
    fn intrinsic_limit() {
        let v = price_call_closed(1, &bsm0(), 1e-8, 15.0, 20.0).unwrap();
        assert!((v - 5.0).abs() < 1e-5);
    }

    #[test]
    fn at_the_money_value() {
        let m = Model::bsm(0.3, 0.1).unwrap();
        let t = 0.2;
        let j = m.jet(15.0).unwrap();
        let v = price_call_closed(1, &m, t, 15.0, 15.0).unwrap();
        let expect = j.a * (t / (2.0 * PI)).sqrt() + j.b * t / 2.0;
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn order_validation() {
        assert!(price_call_closed(3, &bsm0(), 0.1, 15.0, 15.0).is_err());
        assert!(price_call_closed(0, &bsm0(), 0.1, 15.0, 15.0).is_err());
        assert!(price_call_closed(1, &bsm0(), 0.0, 15.0, 15.0).is_err());
    }

    #[test]
    fn cev_explicit_form_matches_jet_form() {
        for &(alpha, x) in &[(0.5, 12.0), (2.0 / 3.0, 20.0), (1.0, 17.0)] {
            let m = Model::cev(0.3, alpha, 0.1).unwrap();
            let a = price_call_cev_closed(0.3, 20.0, x, 0.3, alpha, 0.1).unwrap();
            let b = price_call_closed(1, &m, 0.3, 20.0, x).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + b));
        }
        let at_k = price_call_cev_closed(0.25, 16.0, 16.0, 0.3, 0.5, 0.0).unwrap();
        assert!((at_k - 0.3 * 4.0 * (0.25 / (2.0 * PI)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn parity() {
        let m = Model::bsm(0.3, 0.1).unwrap();
        for order in [1, 2] {
            let call = price_call_closed(order, &m, 0.1, 15.0, 14.0).unwrap();
            let put = price_put(order, &m, 0.1, 15.0, 14.0).unwrap();
            let fwd = forward_from_jet(&m.jet(14.0).unwrap(), order, 0.1, 15.0, 14.0);
            assert_eq!(put - call + fwd, 0.0);
        }
        let call = price_call_closed(1, &bsm0(), 0.1, 15.0, 15.0).unwrap();
        let put = price_put(1, &bsm0(), 0.1, 15.0, 15.0).unwrap();
        assert!((call - put).abs() < 1e-15);
    }

    #[test]
    fn butterfly_weights() {
        let b = Payoff::butterfly(18.0, 20.0, 22.0).unwrap();
        assert_eq!(b.call_legs().unwrap(), vec![(1.0, 18.0), (-2.0, 20.0), (1.0, 22.0)]);
        let skew = Payoff::butterfly(10.0, 12.0, 18.0).unwrap();
        assert!((skew.eval(12.0) - 2.0).abs() < 1e-15);
        assert_eq!(skew.eval(18.0), 0.0);
        assert_eq!(skew.eval(25.0), 0.0);
        assert_eq!(skew.eval(15.0), 1.0);
        let legs: f64 = skew.call_legs().unwrap().iter().map(|&(w, k)| w * (15.0f64 - k).max(0.0)).sum();
        assert!((legs - 1.0).abs() < 1e-14);
        assert!(Payoff::butterfly(20.0, 18.0, 22.0).is_err());
    }

    #[test]
    fn sampled_interpolation() {
        let g = SpatialGrid::new(1.0, 3.0, 1.0).unwrap();
        let p = Payoff::sampled(g, vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(p.eval(1.5), 2.0);
        assert_eq!(p.eval(3.0), 2.0);
        assert_eq!(p.eval(0.5), 0.0);
        assert!(Payoff::sampled(g, vec![1.0]).is_err());
    }

    #[test]
    fn finite_difference_greeks() {
        let g = greeks(|x| Ok(3.0 * x), 2.0, 0.1).unwrap();
        assert!((g.delta - 3.0).abs() < 1e-13 && g.gamma.abs() < 1e-10);
        let g = greeks(|x| Ok(x * x), 2.0, 0.5).unwrap();
        assert!((g.delta - 4.0).abs() < 1e-14 && (g.gamma - 2.0).abs() < 1e-13);
        assert!(greeks(Ok, 0.1, 0.1).is_err());
    }

    #[test]
    fn curve_validation_and_csv() {
        assert!(PriceCurve::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(PriceCurve::new(vec![1.0, 2.0], vec![0.0, f64::NAN]).is_err());
        let c = PriceCurve::new(vec![1.0, 2.0], vec![0.1, 0.25]).unwrap();
        assert_eq!(
            c.to_csv(),
            "x,price\n1.0000000000000000e0,1.0000000000000001e-1\n2.0000000000000000e0,2.5000000000000000e-1\n"
        );
        assert_eq!("0.1".parse::<f64>().unwrap(), "1.0000000000000001e-1".parse::<f64>().unwrap());
    }

    #[test]
    fn closed_requires_diagonal_basepoint() {
        let spec = KernelSpec::new(bsm0(), 1, BasepointRule::Midpoint).unwrap();
        let req = PriceRequest::new(spec, 0.1, Payoff::call(15.0).unwrap()).unwrap();
        assert!(req.closed(15.0).is_err());
    }
}

//! Uniform spatial grids and composite Simpson quadrature on them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Result};

/// Uniform grid `x_min, x_min + dx, ..., x_max` on a truncated half line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        ensure_positive("dx", dx)?;
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(domain(format!(
                "grid requires x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        let cells = (x_max - x_min) / dx;
        if (cells - cells.round()).abs() > 1e-8 * cells.max(1.0) || cells.round() < 2.0 {
            return Err(domain(format!(
                "(x_max - x_min)/dx must be an integer >= 2, got {cells}"
            )));
        }
        Ok(Self { x_min, x_max, dx })
    }

    /// Grid starting at the first node above zero: `dx, 2 dx, ..., x_max`.
    pub fn half_line(x_max: f64, dx: f64) -> Result<Self> {
        Self::new(dx, x_max, dx)
    }

    /// Parses `xmin:xmax:dx`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(domain(format!("grid must be xmin:xmax:dx, got {spec:?}")));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| domain(format!("bad number {p:?} in grid {spec:?}")))?;
        }
        Self::new(v[0], v[1], v[2])
    }

    pub fn intervals(&self) -> usize {
        ((self.x_max - self.x_min) / self.dx).round() as usize
    }

    pub fn len(&self) -> usize {
        self.intervals() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        i.clamp(0.0, self.intervals() as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min - 1e-12 * self.x_max.abs() && x <= self.x_max + 1e-12 * self.x_max.abs()
    }

    /// Halved spacing over the same interval.
    pub fn refined(&self) -> Self {
        Self {
            dx: 0.5 * self.dx,
            ..*self
        }
    }

    pub fn simpson_weights(&self) -> Vec<f64> {
        simpson_weights(self.intervals(), self.dx)
    }
}

/// Composite Simpson weights for `n >= 2` equal intervals of width `h`.
///
/// An odd interval count closes with Simpson's 3/8 rule on the last three
/// intervals, keeping fourth-order accuracy.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2, "Simpson needs at least two intervals");
    let mut w = vec![0.0; n + 1];
    let even = if n.is_multiple_of(2) { n } else { n - 3 };
    if even >= 2 {
        for (i, wi) in w.iter_mut().enumerate().take(even + 1) {
            *wi = if i == 0 || i == even {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
        }
    }
    if even != n {
        for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[even + k] += c * 3.0 * h / 8.0;
        }
    }
    w
}

/// Composite Simpson integral of `f` on `[a, b]` with at least `min_intervals`
/// panels (rounded up to even).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, min_intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = (min_intervals.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += c * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

//! Complex functions of `x` sampled on the shared channel grid.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;

/// Uniform grid on `[0, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_max: f64,
    len: usize,
}

pub const DEFAULT_GRID_POINTS: usize = 2048;

impl Grid {
    pub fn new(x_max: f64, len: usize) -> Result<Self> {
        if len < 4 {
            return Err(Error::Parameter(format!("grid needs at least 4 points, got {len}")));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Parameter(format!("grid extent must be positive, got {x_max}")));
        }
        Ok(Self { x_max, len })
    }

    /// `N = 2048` points on `[0, max(10, 20/nu)]`.
    pub fn default_for_decay(nu: f64) -> Result<Self> {
        Self::new(default_extent(nu), DEFAULT_GRID_POINTS)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.x_max / (self.len - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.len {
            self.x_max
        } else {
            i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.x(i)).collect()
    }

    /// Same extent, twice the resolution (every old node is kept).
    pub fn refined(&self) -> Self {
        Self {
            x_max: self.x_max,
            len: 2 * self.len - 1,
        }
    }

    /// Index of the interval containing `x` (clamped), and the local offset.
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.step();
        let i = ((x / h).floor() as usize).min(self.len - 2);
        (i, x - i as f64 * h)
    }
}

pub fn default_extent(nu: f64) -> f64 {
    10f64.max(20.0 / nu)
}

/// Envelope `|v(x)| <= amplitude * exp(-rate x)` fitted on the grid tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    pub rate: f64,
}

impl DecayEnvelope {
    pub const ZERO: Self = Self {
        amplitude: 0.0,
        rate: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    /// Regression on `ln |v|` over the last quarter of the grid.
    pub fn fit(grid: &Grid, values: &[Complex64]) -> Self {
        let n = grid.len();
        let start = n - n / 4;
        let xs: Vec<f64> = (start..n).map(|i| grid.x(i)).collect();
        let mags: Vec<f64> = values[start..].iter().map(|v| v.norm()).collect();
        if mags.iter().all(|m| *m == 0.0) {
            return Self::ZERO;
        }
        match fit::exponential_decay(&xs, &mags) {
            Some((amplitude, rate)) => Self { amplitude, rate },
            None => Self::ZERO,
        }
    }
}

/// One Fourier coefficient as a function of `x`, optionally carrying its
/// derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficient {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    derivs: Option<Vec<Complex64>>,
    decay: DecayEnvelope,
}

impl SampledCoefficient {
    pub fn new(
        grid: Arc<Grid>,
        values: Vec<Complex64>,
        derivs: Option<Vec<Complex64>>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(d) = &derivs {
            if d.len() != grid.len() {
                return Err(Error::Parameter(format!(
                    "expected {} derivative samples, got {}",
                    grid.len(),
                    d.len()
                )));
            }
        }
        let decay = DecayEnvelope::fit(&grid, &values);
        Ok(Self {
            grid,
            values,
            derivs,
            decay,
        })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            derivs: Some(vec![Complex64::new(0.0, 0.0); n]),
            decay: DecayEnvelope::ZERO,
        }
    }

    /// Samples `f` and its derivative `df` at the grid nodes.
    pub fn from_fn(
        grid: Arc<Grid>,
        f: impl Fn(f64) -> Complex64,
        df: impl Fn(f64) -> Complex64,
    ) -> Self {
        let xs = grid.points();
        let values = xs.iter().map(|&x| f(x)).collect();
        let derivs = xs.iter().map(|&x| df(x)).collect();
        Self::new(grid, values, Some(derivs)).expect("lengths match by construction")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivs(&self) -> Option<&[Complex64]> {
        self.derivs.as_deref()
    }

    pub fn decay(&self) -> DecayEnvelope {
        self.decay
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == Complex64::new(0.0, 0.0))
            && self
                .derivs
                .as_ref()
                .is_none_or(|d| d.iter().all(|v| *v == Complex64::new(0.0, 0.0)))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            derivs: self.derivs.as_ref().map(|d| d.iter().map(|v| f(*v)).collect()),
            decay: self.decay,
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.map(|v| c * v);
        out.decay.amplitude *= c.norm();
        out
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::Domain(format!(
                "x = {x} lies outside the semi-infinite channel"
            )));
        }
        Ok(())
    }

    /// Value at `x`: cubic Hermite between nodes when derivatives are stored,
    /// four-point Lagrange otherwise; exponential envelope beyond `x_max`.
    pub fn eval(&self, x: f64) -> Result<Complex64> {
        self.check_domain(x)?;
        let g = &self.grid;
        if x >= g.x_max() {
            let last = self.values[g.len() - 1];
            return Ok(last * (-self.decay.rate * (x - g.x_max())).exp());
        }
        let (i, u) = g.locate(x);
        let h = g.step();
        match &self.derivs {
            Some(d) => Ok(hermite(self.values[i], self.values[i + 1], d[i], d[i + 1], h, u)),
            None => Ok(lagrange4(&self.values, i, u, h)),
        }
    }

    /// Derivative at `x` from the stored derivative samples (four-point
    /// Lagrange); refused when no derivative data is carried.
    pub fn eval_deriv(&self, x: f64) -> Result<Complex64> {
        self.check_domain(x)?;
        let d = self
            .derivs
            .as_ref()
            .ok_or_else(|| Error::Parameter("coefficient carries no derivative samples".into()))?;
        let g = &self.grid;
        if x >= g.x_max() {
            let last = self.values[g.len() - 1];
            let r = self.decay.rate;
            return Ok(-r * last * (-r * (x - g.x_max())).exp());
        }
        let (i, u) = g.locate(x);
        Ok(lagrange4(d, i, u, g.step()))
    }

    /// Value and derivative together.
    pub fn eval_both(&self, x: f64) -> Result<(Complex64, Complex64)> {
        Ok((self.eval(x)?, self.eval_deriv(x)?))
    }
}

fn hermite(
    y0: Complex64,
    y1: Complex64,
    d0: Complex64,
    d1: Complex64,
    h: f64,
    u: f64,
) -> Complex64 {
    let t = u / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}

/// Cubic through the four nodes around interval `i`, evaluated at offset `u`.
pub(crate) fn lagrange4(v: &[Complex64], i: usize, u: f64, h: f64) -> Complex64 {
    let n = v.len();
    let s = i.saturating_sub(1).min(n - 4);
    // abscissa of the evaluation point relative to node s, in steps
    let t = (i - s) as f64 + u / h;
    let w = lagrange4_weights(t);
    v[s] * w[0] + v[s + 1] * w[1] + v[s + 2] * w[2] + v[s + 3] * w[3]
}

/// Weights of the cubic through nodes 0, 1, 2, 3 at abscissa `t`.
pub(crate) fn lagrange4_weights(t: f64) -> [f64; 4] {
    [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::new(10.0, 101).unwrap())
    }

    #[test]
    fn node_points_are_reproduced() {
        let g = grid();
        let c = SampledCoefficient::from_fn(g.clone(), |x| Complex64::new(x.sin(), x), |x| {
            Complex64::new(x.cos(), 1.0)
        });
        for i in [0, 7, 50, 99] {
            let x = g.x(i);
            assert_eq!(c.eval(x).unwrap(), c.values()[i]);
        }
    }

    #[test]
    fn cubic_is_exact_between_nodes() {
        let g = grid();
        let f = |x: f64| Complex64::new(x * x * x - 2.0 * x, 0.5 * x * x);
        let df = |x: f64| Complex64::new(3.0 * x * x - 2.0, x);
        let c = SampledCoefficient::from_fn(g.clone(), f, df);
        for x in [0.05, 3.33, 9.97] {
            assert!((c.eval(x).unwrap() - f(x)).norm() < 1e-12 * (1.0 + f(x).norm()));
            assert!((c.eval_deriv(x).unwrap() - df(x)).norm() < 1e-11 * (1.0 + df(x).norm()));
        }
        let plain = SampledCoefficient::new(g.clone(), g.points().iter().map(|&x| f(x)).collect(), None)
            .unwrap();
        assert!((plain.eval(4.56).unwrap() - f(4.56)).norm() < 1e-11);
    }

    #[test]
    fn tail_follows_envelope() {
        let g = grid();
        let c = SampledCoefficient::from_fn(
            g.clone(),
            |x| Complex64::new(0.0, 2.0 * (-0.8 * x).exp()),
            |x| Complex64::new(0.0, -1.6 * (-0.8 * x).exp()),
        );
        let r = c.decay().rate;
        assert!((r - 0.8).abs() < 1e-10);
        let at_end = c.values()[g.len() - 1];
        let v = c.eval(g.x_max() + 1.0 / r).unwrap();
        assert!((v - at_end / std::f64::consts::E).norm() < 1e-12);
    }

    #[test]
    fn negative_x_is_a_domain_error() {
        let c = SampledCoefficient::zeros(grid());
        assert!(matches!(c.eval(-1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn missing_derivatives_refused() {
        let g = grid();
        let c = SampledCoefficient::new(g.clone(), vec![Complex64::new(1.0, 0.0); g.len()], None)
            .unwrap();
        assert!(c.eval_deriv(1.0).is_err());
    }

    #[test]
    fn refined_grid_keeps_nodes() {
        let g = Grid::new(20.0, 2048).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 4095);
        assert!((r.x(2 * 17) - g.x(17)).abs() < 1e-13);
    }
}

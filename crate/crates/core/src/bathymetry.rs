//! Fourier representation `g~(x, y) = sum_l g_l(x) e^{i l y}` of the bottom shape.
//!
//! Only the `l > 0` half is ever specified; the `l < 0` half is produced by
//! mirroring, so `g_{-l} = -g_l = conj(g_l)` holds bit-exactly. Together the
//! two relations force every `g_l` to be purely imaginary, which the builders
//! check before mirroring.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::sampled::{Grid, SampledCoefficient};

/// How the bottom is described before sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BathymetrySource {
    /// `g~ ≡ 0`.
    Flat,
    /// `g_l(x) = i a_l e^{-nu x}` for every listed `l > 0`.
    Builtin { nu: f64, modes: Vec<BuiltinMode> },
    /// Tabulated `g_l` rows `(l, x, re, im)` for `l > 0`.
    Table { rows: Vec<TableRow> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuiltinMode {
    pub l: i32,
    /// Complex amplitude; must be real for an admissible bottom.
    pub a: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub l: i32,
    pub x: f64,
    pub re: f64,
    pub im: f64,
}

/// Sampled bathymetry coefficients with both symmetries enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct BathymetrySpec {
    grid: Arc<Grid>,
    coefficients: BTreeMap<i32, SampledCoefficient>,
}

const REALNESS_TOL: f64 = 1e-12;

impl BathymetrySpec {
    pub fn flat(grid: Arc<Grid>) -> Self {
        Self {
            grid,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn build(source: &BathymetrySource, grid: Arc<Grid>) -> Result<Self> {
        match source {
            BathymetrySource::Flat => Ok(Self::flat(grid)),
            BathymetrySource::Builtin { nu, modes } => Self::builtin(*nu, modes, grid),
            BathymetrySource::Table { rows } => Self::from_table(rows, grid),
        }
    }

    pub fn builtin(nu: f64, modes: &[BuiltinMode], grid: Arc<Grid>) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Bathymetry(format!("decay rate must be positive, got {nu}")));
        }
        let mut positive = BTreeMap::new();
        for mode in modes {
            check_index(mode.l)?;
            if mode.a.im != 0.0 {
                return Err(Error::Bathymetry(format!(
                    "mode {}: amplitude {} is not real; g_l = i a e^(-nu x) then violates g_-l = -g_l = conj(g_l)",
                    mode.l, mode.a
                )));
            }
            let a = mode.a.re;
            let c = SampledCoefficient::from_fn(
                grid.clone(),
                |x| Complex64::new(0.0, a * (-nu * x).exp()),
                |x| Complex64::new(0.0, -nu * a * (-nu * x).exp()),
            );
            if positive.insert(mode.l, c).is_some() {
                return Err(Error::Bathymetry(format!("mode {} listed twice", mode.l)));
            }
        }
        Ok(Self::mirrored(grid, positive))
    }

    pub fn from_table(rows: &[TableRow], grid: Arc<Grid>) -> Result<Self> {
        let mut by_mode: BTreeMap<i32, Vec<TableRow>> = BTreeMap::new();
        for row in rows {
            check_index(row.l)?;
            if !(row.x.is_finite() && row.re.is_finite() && row.im.is_finite()) {
                return Err(Error::Bathymetry(format!("non-finite table row {row:?}")));
            }
            by_mode.entry(row.l).or_default().push(*row);
        }
        let mut positive = BTreeMap::new();
        for (l, mut rows) in by_mode {
            rows.sort_by(|a, b| a.x.total_cmp(&b.x));
            if rows.len() < 4 {
                return Err(Error::Bathymetry(format!("mode {l}: need at least 4 rows")));
            }
            if rows.windows(2).any(|w| w[1].x <= w[0].x) {
                return Err(Error::Bathymetry(format!("mode {l}: abscissae must be distinct")));
            }
            if rows[0].x > 0.0 {
                return Err(Error::Bathymetry(format!("mode {l}: table must start at x = 0")));
            }
            let scale = rows.iter().map(|r| r.im.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            if let Some(bad) = rows.iter().find(|r| r.re.abs() > REALNESS_TOL * scale.max(1.0)) {
                return Err(Error::Bathymetry(format!(
                    "mode {l}: real part {} at x = {} breaks g_-l = -g_l = conj(g_l)",
                    bad.re, bad.x
                )));
            }
            let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.im).collect();
            let tail_from = xs.len() - (xs.len() / 4).max(2);
            let (_, rate) = fit::exponential_decay(
                &xs[tail_from..],
                &ys[tail_from..].iter().map(|v| v.abs()).collect::<Vec<_>>(),
            )
            .unwrap_or((0.0, 0.0));
            let all_zero = ys.iter().all(|v| *v == 0.0);
            if !all_zero && !(rate > 0.0) {
                return Err(Error::Bathymetry(format!(
                    "mode {l}: table tail does not decay (fitted rate {rate})"
                )));
            }
            let x_last = *xs.last().unwrap();
            let y_last = *ys.last().unwrap();
            let mut values = Vec::with_capacity(grid.len());
            let mut derivs = Vec::with_capacity(grid.len());
            for x in grid.points() {
                let (v, d) = if x <= x_last {
                    interpolate_table(&xs, &ys, x)
                } else {
                    let e = (-rate * (x - x_last)).exp();
                    (y_last * e, -rate * y_last * e)
                };
                values.push(Complex64::new(0.0, v));
                derivs.push(Complex64::new(0.0, d));
            }
            positive.insert(l, SampledCoefficient::new(grid.clone(), values, Some(derivs))?);
        }
        Ok(Self::mirrored(grid, positive))
    }

    fn mirrored(grid: Arc<Grid>, positive: BTreeMap<i32, SampledCoefficient>) -> Self {
        let mut coefficients = BTreeMap::new();
        for (l, c) in positive {
            if c.is_identically_zero() {
                continue;
            }
            coefficients.insert(-l, c.map(|v| -v));
            coefficients.insert(l, c);
        }
        Self { grid, coefficients }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &BTreeMap<i32, SampledCoefficient> {
        &self.coefficients
    }

    pub fn get(&self, l: i32) -> Option<&SampledCoefficient> {
        self.coefficients.get(&l)
    }

    pub fn is_flat(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Largest `|l|` present (0 for a flat bottom).
    pub fn support_radius(&self) -> i32 {
        self.coefficients.keys().map(|l| l.abs()).max().unwrap_or(0)
    }

    /// Largest violation of `g_-l = -g_l` and `g_-l = conj(g_l)` over the grid.
    pub fn symmetry_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (l, c) in &self.coefficients {
            let Some(m) = self.coefficients.get(&-l) else {
                return f64::INFINITY;
            };
            for (a, b) in c.values().iter().zip(m.values()) {
                worst = worst.max((a + b).norm()).max((b - a.conj()).norm());
            }
        }
        worst
    }

    /// Physical bottom shape `g~(x, y)` and its gradient `(g_x, g_y)`.
    pub fn eval_physical(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let mut g = Complex64::new(0.0, 0.0);
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        for (l, c) in &self.coefficients {
            let (v, d) = c.eval_both(x)?;
            let e = Complex64::from_polar(1.0, *l as f64 * y);
            g += v * e;
            gx += d * e;
            gy += Complex64::new(0.0, *l as f64) * v * e;
        }
        Ok((g.re, gx.re, gy.re))
    }

    /// Largest ratio `|g_l(x)| / (Mcal e^{-|l| rho} e^{-nu x})` over the grid.
    pub fn bound_ratio(&self, mcal: f64, rho: f64, nu: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (l, c) in &self.coefficients {
            for (i, v) in c.values().iter().enumerate() {
                let x = self.grid.x(i);
                let bound = mcal * (-(l.abs() as f64) * rho - nu * x).exp();
                worst = worst.max(v.norm() / bound);
            }
        }
        worst
    }
}

fn check_index(l: i32) -> Result<()> {
    if l <= 0 {
        return Err(Error::Bathymetry(format!(
            "only l > 0 may be specified (got {l}); g_0 vanishes and l < 0 is mirrored"
        )));
    }
    Ok(())
}

/// Local cubic through the four table nodes around `x`: value and derivative.
fn interpolate_table(xs: &[f64], ys: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    let i = match xs.partition_point(|&t| t <= x) {
        0 => 0,
        k => (k - 1).min(n - 2),
    };
    let s = i.saturating_sub(1).min(n - 4);
    let nodes = &xs[s..s + 4];
    let vals = &ys[s..s + 4];
    let mut value = 0.0;
    let mut deriv = 0.0;
    for k in 0..4 {
        let mut w = 1.0;
        let mut dw = 0.0;
        for j in 0..4 {
            if j == k {
                continue;
            }
            let denom = nodes[k] - nodes[j];
            // product rule on prod_j (x - x_j)/(x_k - x_j)
            dw = dw * (x - nodes[j]) / denom + w / denom;
            w *= (x - nodes[j]) / denom;
        }
        value += vals[k] * w;
        deriv += vals[k] * dw;
    }
    (value, deriv)
}

/// Parses a bathymetry table in CSV form with columns `l, x, re, im`.
///
/// Blank lines and lines starting with `#` are skipped; a first line whose
/// first field is not an integer is treated as a header.
pub fn parse_table_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows.is_empty() && fields.len() == 4 && fields[0].eq_ignore_ascii_case("l") {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields (l, x, re, im), got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Parse(format!("line {}: invalid {what}", lineno + 1));
        rows.push(TableRow {
            l: fields[0].parse().map_err(|_| bad("l"))?,
            x: fields[1].parse().map_err(|_| bad("x"))?,
            re: fields[2].parse().map_err(|_| bad("re"))?,
            im: fields[3].parse().map_err(|_| bad("im"))?,
        });
    }
    Ok(rows)
}

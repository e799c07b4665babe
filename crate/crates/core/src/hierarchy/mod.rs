//! Order-by-order Fourier-mode expansion of the streamfunction.
//!
//! `psi = sum_j sum_(m,n) b^(j)_(m,n)(x) e^{i(m y + sigma(n) t)}` with
//! `n = ±kappa`. Layer 0 is the travelling wave; layer `j` solves, for each
//! mode, the ODE
//! `sigma(n) (b'' - (m^2 + F) b) - i Fcal b' = [b^(j-1)_(.,n), mu g~]_m`.

pub mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bathymetry::BathymetrySpec;
use crate::error::{Error, Result};
use crate::mode_ode::{self, OdeTolerances};
use crate::model::{CheckedConfig, WaveParams};
use crate::sampled::{Grid, SampledCoefficient};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Layers whose `eps` falls below this stop the expansion.
pub const EPS_FLOOR: f64 = 1e-14;
/// Tolerance on the imaginary residue of a reconstruction.
pub const IMAG_TOL: f64 = 1e-10;

/// `(m, n)` key of a Fourier mode.
pub type Mode = (i32, i32);

/// The truncated index set `{(m, n): 0 < |m| <= m_max, n = ±kappa}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    pub m_max: i32,
    pub kappa: i32,
}

impl ModeSet {
    pub fn new(m_max: i32, kappa: i32) -> Result<Self> {
        if m_max < 1 || kappa < 1 {
            return Err(Error::Parameter(format!(
                "mode set needs m_max >= 1 and kappa >= 1 (got {m_max}, {kappa})"
            )));
        }
        Ok(Self { m_max, kappa })
    }

    /// Lossless truncation `|m~| + J * (support radius of the bottom)`.
    pub fn lossless(wave: &WaveParams, j_max: usize, bathy: &BathymetrySpec) -> Result<Self> {
        let m_max = wave.m_tilde.abs() + j_max as i32 * bathy.support_radius();
        Self::new(m_max, wave.kappa)
    }

    pub fn contains(&self, (m, n): Mode) -> bool {
        m != 0 && m.abs() <= self.m_max && n.abs() == self.kappa
    }

    /// Modes with `m > 0`, the ones that are actually solved.
    pub fn positive(&self) -> Vec<Mode> {
        (1..=self.m_max)
            .flat_map(|m| [(m, self.kappa), (m, -self.kappa)])
            .collect()
    }

    pub fn all(&self) -> Vec<Mode> {
        (-self.m_max..=self.m_max)
            .filter(|m| *m != 0)
            .flat_map(|m| [(m, self.kappa), (m, -self.kappa)])
            .collect()
    }
}

/// One order of the expansion. Modes that vanish identically are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLayer {
    pub order: usize,
    pub coefficients: BTreeMap<Mode, SampledCoefficient>,
    /// Sup envelope estimate; see [`layer_eps`].
    pub eps: f64,
    /// Largest discrepancy of the independent `n -> -n` solve before
    /// symmetrisation (zero for layer 0).
    pub cross_check: f64,
}

impl SpectralLayer {
    pub fn get(&self, m: i32, n: i32) -> Option<&SampledCoefficient> {
        self.coefficients.get(&(m, n))
    }

    /// The sequence `m -> b_(m,n)` for fixed `n`.
    pub fn sequence(&self, n: i32) -> BTreeMap<i32, SampledCoefficient> {
        self.coefficients
            .iter()
            .filter(|((_, nn), _)| *nn == n)
            .map(|((m, _), c)| (*m, c.clone()))
            .collect()
    }

    /// Cross-channel indices carrying a nonzero coefficient.
    pub fn support(&self) -> BTreeSet<i32> {
        self.coefficients.keys().map(|(m, _)| *m).collect()
    }

    /// Largest violation of `b_(-m,n) = -b_(m,n)` and
    /// `b_(m,n) = conj(b_(-m,-n))`, values and derivatives.
    pub fn symmetry_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((m, n), c) in &self.coefficients {
            let (Some(odd), Some(conj)) = (self.get(-m, *n), self.get(-m, -n)) else {
                return f64::INFINITY;
            };
            let pairs = [
                (c.values(), odd.values(), conj.values()),
                (
                    c.derivs().unwrap_or(&[]),
                    odd.derivs().unwrap_or(&[]),
                    conj.derivs().unwrap_or(&[]),
                ),
            ];
            for (a, b, cc) in pairs {
                for ((x, y), z) in a.iter().zip(b).zip(cc) {
                    worst = worst.max((x + y).norm()).max((x - z.conj()).norm());
                }
            }
        }
        worst
    }
}

/// `b^(0)_(m,n) = A (4i)^{-1} sign(m) e^{i n x}` on `(±m~, ±kappa)`.
pub fn zeroth_layer(wave: &WaveParams, grid: Arc<Grid>) -> SpectralLayer {
    let mut coefficients = BTreeMap::new();
    let amp = Complex64::new(0.0, -0.25 * wave.amplitude);
    for m in [wave.m_tilde, -wave.m_tilde] {
        for n in [wave.kappa, -wave.kappa] {
            let c = amp * (m.signum() as f64);
            let k = n as f64;
            let coeff = SampledCoefficient::from_fn(
                grid.clone(),
                |x| c * Complex64::from_polar(1.0, k * x),
                |x| c * I * k * Complex64::from_polar(1.0, k * x),
            );
            coefficients.insert((m, n), coeff);
        }
    }
    let mut layer = SpectralLayer {
        order: 0,
        coefficients,
        eps: 0.0,
        cross_check: 0.0,
    };
    layer.eps = layer_eps(&layer, 0.0);
    layer
}

/// `[f, g]_m = sum_l l (f_l g'_(m-l) - g_l f'_(m-l))` over the finite supports.
pub fn bracket(
    f: &BTreeMap<i32, SampledCoefficient>,
    g: &BTreeMap<i32, SampledCoefficient>,
    m: i32,
) -> Result<SampledCoefficient> {
    let grid = f
        .values()
        .chain(g.values())
        .next()
        .map(|c| c.grid().clone())
        .ok_or_else(|| Error::Parameter("bracket of two empty sequences has no grid".into()))?;
    let mut out = vec![ZERO; grid.len()];
    fn deriv(c: &SampledCoefficient) -> Result<&[Complex64]> {
        c.derivs()
            .ok_or_else(|| Error::Parameter("bracket needs derivative samples".into()))
    }
    // each index contributes one combined term, so [f, f] cancels exactly
    let indices: BTreeSet<i32> = f.keys().chain(g.keys()).copied().collect();
    for l in indices {
        let w = l as f64;
        let left = match (f.get(&l), g.get(&(m - l))) {
            (Some(fl), Some(gk)) => Some((fl.values(), deriv(gk)?)),
            _ => None,
        };
        let right = match (g.get(&l), f.get(&(m - l))) {
            (Some(gl), Some(fk)) => Some((gl.values(), deriv(fk)?)),
            _ => None,
        };
        for (i, o) in out.iter_mut().enumerate() {
            let a = left.map_or(ZERO, |(v, d)| v[i] * d[i]);
            let b = right.map_or(ZERO, |(v, d)| v[i] * d[i]);
            *o += w * (a - b);
        }
    }
    SampledCoefficient::new(grid, out, None)
}

/// `sup_(m,n,x) max(|m| |b|, |b'|) e^{weight x}`.
///
/// Layers `j >= 1` use `weight = nu / 2`; the non-decaying layer 0 is
/// measured with `weight = 0`.
pub fn layer_eps(layer: &SpectralLayer, weight: f64) -> f64 {
    let mut eps: f64 = 0.0;
    for ((m, _), c) in &layer.coefficients {
        let grid = c.grid();
        let d = c.derivs().unwrap_or(&[]);
        for (i, v) in c.values().iter().enumerate() {
            let dv = d.get(i).map_or(0.0, |z| z.norm());
            let e = (weight * grid.x(i)).exp();
            eps = eps.max((m.abs() as f64 * v.norm()).max(dv) * e);
        }
    }
    eps
}

/// Everything `next_layer` needs besides the previous layer.
#[derive(Debug, Clone)]
pub struct LayerContext<'a> {
    pub checked: &'a CheckedConfig,
    pub bathy: &'a BathymetrySpec,
    pub modes: ModeSet,
    pub tol: OdeTolerances,
}

/// One `m > 0` mode solve of a layer, kept for certification.
#[derive(Debug, Clone)]
pub struct ModeSolve {
    pub mode: Mode,
    pub solution: mode_ode::OdeSolution,
    /// `sup_x |R(x)| e^{nu x}` of the normalised right-hand side.
    pub rhs_bound: f64,
}

/// Solves every mode of order `prev.order + 1` with `m > 0` and either sign
/// of `n`; modes with a vanishing right-hand side are omitted.
pub fn solve_modes(prev: &SpectralLayer, ctx: &LayerContext<'_>) -> Result<Vec<ModeSolve>> {
    let order = prev.order + 1;
    let ch = &ctx.checked.channel;
    let wave = &ctx.checked.wave;
    let mu = Complex64::new(ch.mu, 0.0);
    let g: BTreeMap<i32, SampledCoefficient> = ctx
        .bathy
        .coefficients()
        .iter()
        .map(|(l, c)| (*l, c.scaled(mu)))
        .collect();
    let sequences: BTreeMap<i32, BTreeMap<i32, SampledCoefficient>> = [wave.kappa, -wave.kappa]
        .into_iter()
        .map(|n| (n, prev.sequence(n)))
        .collect();

    let solved: Vec<Result<Option<ModeSolve>>> = ctx
        .modes
        .positive()
        .into_par_iter()
        .map(|(m, n)| {
            let annotate = |e: Error| Error::Mode {
                m,
                n,
                order,
                source: Box::new(e),
            };
            let seq = &sequences[&n];
            if seq.is_empty() || g.is_empty() {
                return Ok(None);
            }
            let rhs = bracket(seq, &g, m).map_err(annotate)?;
            if rhs.is_identically_zero() {
                return Ok(None);
            }
            let sigma_n = wave.sigma_n(ch, n).map_err(annotate)?;
            let rhs = rhs.scaled(Complex64::new(1.0 / sigma_n, 0.0));
            let alpha = ch.fcal / (2.0 * sigma_n);
            let beta_sq = ch.f + (m * m) as f64;
            let solution =
                mode_ode::solve_signed(alpha, beta_sq, &rhs, &ctx.tol).map_err(annotate)?;
            let grid = rhs.grid();
            let rhs_bound = rhs
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| v.norm() * (ch.nu * grid.x(i)).exp())
                .fold(0.0, f64::max);
            Ok(Some(ModeSolve {
                mode: (m, n),
                solution,
                rhs_bound,
            }))
        })
        .collect();
    solved.into_iter().filter_map(Result::transpose).collect()
}

/// Solves every mode of order `prev.order + 1` with `m > 0`, mirrors `m < 0`,
/// and symmetrises the `n = -kappa` family after cross-checking it.
pub fn next_layer(prev: &SpectralLayer, ctx: &LayerContext<'_>) -> Result<SpectralLayer> {
    let order = prev.order + 1;
    let ch = &ctx.checked.channel;
    let wave = &ctx.checked.wave;
    let positive: BTreeMap<Mode, SampledCoefficient> = solve_modes(prev, ctx)?
        .into_iter()
        .map(|s| (s.mode, s.solution.b))
        .collect();

    // independent n -> -n check: b_(m,kappa) = -conj(b_(m,-kappa))
    let kappa = wave.kappa;
    let mut cross_check: f64 = 0.0;
    for m in 1..=ctx.modes.m_max {
        let a = positive.get(&(m, kappa));
        let b = positive.get(&(m, -kappa));
        let diff = match (a, b) {
            (None, None) => 0.0,
            (Some(a), None) | (None, Some(a)) => a.sup_norm(),
            (Some(a), Some(b)) => {
                let dv = a.values().iter().zip(b.values());
                let dd = a.derivs().unwrap_or(&[]).iter().zip(b.derivs().unwrap_or(&[]));
                dv.chain(dd).map(|(x, y)| (x + y.conj()).norm()).fold(0.0, f64::max)
            }
        };
        cross_check = cross_check.max(diff);
    }

    let mut coefficients = BTreeMap::new();
    for ((m, n), c) in positive {
        if n != kappa {
            continue;
        }
        let partner = c.map(|v| -v.conj());
        coefficients.insert((-m, -n), partner.map(|v| -v));
        coefficients.insert((m, -n), partner);
        coefficients.insert((-m, n), c.map(|v| -v));
        coefficients.insert((m, n), c);
    }
    let mut layer = SpectralLayer {
        order,
        coefficients,
        eps: 0.0,
        cross_check,
    };
    layer.eps = layer_eps(&layer, 0.5 * ch.nu);
    Ok(layer)
}

/// Convergence record of a hierarchy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub eps: Vec<f64>,
    /// `eps_(j+1) / eps_j` for `j >= 1`.
    pub ratios: Vec<f64>,
    /// Largest measured ratio (0 when fewer than two decaying layers exist).
    pub l_measured: f64,
    /// Analytic `L(mu)` reported as a certificate.
    pub l_mu: f64,
    pub threshold_ok: bool,
    pub stopped_early: bool,
    pub max_cross_check: f64,
}

/// Completed expansion. Layers are immutable once built.
#[derive(Debug, Clone)]
pub struct ExpansionState {
    pub checked: CheckedConfig,
    pub bathy: BathymetrySpec,
    pub modes: ModeSet,
    pub grid: Arc<Grid>,
    pub layers: Vec<SpectralLayer>,
    pub convergence: Convergence,
}

/// Builds layers `0..=j_max`, stopping early once `eps_j < EPS_FLOOR`.
///
/// Two consecutive contraction ratios above 1 abort with
/// [`Error::Divergence`]. `m_max = None` selects the lossless truncation.
pub fn run_hierarchy(
    checked: &CheckedConfig,
    bathy: &BathymetrySpec,
    j_max: usize,
    m_max: Option<i32>,
    tol: OdeTolerances,
) -> Result<ExpansionState> {
    let grid = bathy.grid().clone();
    let modes = match m_max {
        Some(m) => ModeSet::new(m, checked.wave.kappa)?,
        None => ModeSet::lossless(&checked.wave, j_max, bathy)?,
    };
    if checked.wave.m_tilde > modes.m_max {
        return Err(Error::Parameter(format!(
            "m_max = {} truncates the travelling wave (m~ = {})",
            modes.m_max, checked.wave.m_tilde
        )));
    }
    let ctx = LayerContext {
        checked,
        bathy,
        modes,
        tol,
    };
    let mut layers = vec![zeroth_layer(&checked.wave, grid.clone())];
    let mut ratios = Vec::new();
    let mut stopped_early = false;
    for j in 1..=j_max {
        let layer = next_layer(&layers[j - 1], &ctx)?;
        log::debug!("layer {j}: eps = {:.3e}, {} modes", layer.eps, layer.coefficients.len());
        if j >= 2 {
            let prev = layers[j - 1].eps;
            let r = if prev > 0.0 { layer.eps / prev } else { 0.0 };
            ratios.push(r);
            let n = ratios.len();
            if n >= 2 && ratios[n - 1] > 1.0 && ratios[n - 2] > 1.0 {
                return Err(Error::Divergence { ratios });
            }
        }
        let small = layer.eps < EPS_FLOOR;
        layers.push(layer);
        if small {
            stopped_early = j < j_max;
            break;
        }
    }
    let eps: Vec<f64> = layers.iter().map(|l| l.eps).collect();
    let convergence = Convergence {
        l_measured: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
        eps,
        l_mu: checked.l_mu,
        threshold_ok: checked.threshold_ok,
        stopped_early,
        max_cross_check: layers.iter().map(|l| l.cross_check).fold(0.0, f64::max),
    };
    Ok(ExpansionState {
        checked: checked.clone(),
        bathy: bathy.clone(),
        modes,
        grid,
        layers,
        convergence,
    })
}

/// `psi` and its first derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamGradient {
    pub psi: f64,
    pub psi_x: f64,
    pub psi_y: f64,
    pub psi_t: f64,
}

impl ExpansionState {
    /// Highest order actually present.
    pub fn order(&self) -> usize {
        self.layers.len() - 1
    }

    fn sigma_n(&self, n: i32) -> f64 {
        if n > 0 {
            self.checked.sigma
        } else {
            -self.checked.sigma
        }
    }

    /// Closed-form travelling wave and its derivatives.
    pub fn wave_gradient(&self, x: f64, y: f64, t: f64) -> StreamGradient {
        let w = &self.checked.wave;
        let (k, m, a, s) = (w.kappa as f64, w.m_tilde as f64, w.amplitude, self.checked.sigma);
        let (sy, cy) = (m * y).sin_cos();
        let (sp, cp) = (k * x + s * t).sin_cos();
        StreamGradient {
            psi: a * sy * cp,
            psi_x: -a * k * sy * sp,
            psi_y: a * m * cy * cp,
            psi_t: -a * s * sy * sp,
        }
    }

    /// Sum of layers `from..=to` (complex, before the reality check).
    fn layer_sum(&self, from: usize, to: usize, x: f64, y: f64, t: f64) -> Result<[Complex64; 4]> {
        let mut acc = [ZERO; 4];
        for layer in &self.layers[from..=to.min(self.order())] {
            for ((m, n), c) in &layer.coefficients {
                let (b, db) = c.eval_both(x)?;
                let phase = Complex64::from_polar(1.0, *m as f64 * y + self.sigma_n(*n) * t);
                acc[0] += b * phase;
                acc[1] += db * phase;
                acc[2] += I * (*m as f64) * b * phase;
                acc[3] += I * self.sigma_n(*n) * b * phase;
            }
        }
        Ok(acc)
    }

    fn real_part(acc: [Complex64; 4]) -> Result<StreamGradient> {
        let scale = acc.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
        let worst = acc.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if worst > IMAG_TOL * scale {
            return Err(Error::Symmetry(format!(
                "reconstruction left an imaginary residue {worst:.3e}"
            )));
        }
        Ok(StreamGradient {
            psi: acc[0].re,
            psi_x: acc[1].re,
            psi_y: acc[2].re,
            psi_t: acc[3].re,
        })
    }

    /// Correction `sum_(1 <= j <= J)` alone, with its derivatives.
    pub fn correction_gradient(&self, x: f64, y: f64, t: f64, j: usize) -> Result<StreamGradient> {
        if j == 0 || self.order() == 0 {
            // still reject points outside the channel
            if x < 0.0 || x.is_nan() {
                return Err(Error::Domain(format!("x = {x} lies outside the channel")));
            }
            return Ok(StreamGradient::default());
        }
        Self::real_part(self.layer_sum(1, j, x, y, t)?)
    }

    /// `psi` through order `j` and its first derivatives.
    pub fn gradient(&self, x: f64, y: f64, t: f64, j: usize) -> Result<StreamGradient> {
        if j > self.order() {
            return Err(Error::Parameter(format!(
                "order {j} requested but only {} layers were built",
                self.order()
            )));
        }
        let w = self.wave_gradient(x, y, t);
        let c = self.correction_gradient(x, y, t, j)?;
        Ok(StreamGradient {
            psi: w.psi + c.psi,
            psi_x: w.psi_x + c.psi_x,
            psi_y: w.psi_y + c.psi_y,
            psi_t: w.psi_t + c.psi_t,
        })
    }

    pub fn reconstruct(&self, x: f64, y: f64, t: f64, j: usize) -> Result<f64> {
        self.gradient(x, y, t, j).map(|g| g.psi)
    }

    /// Sup over `samples` of the PDE residual with `psi` truncated at order `j`.
    ///
    /// Samples are `(grid index, y, t)`; `b''` comes from a fourth-order
    /// central difference of the stored `b'`, so indices must lie in
    /// `2..len-2`. Layer 0 and the bottom enter in closed form.
    pub fn pde_residual(&self, samples: &[(usize, f64, f64)], j: usize) -> Result<f64> {
        let ch = &self.checked.channel;
        let n_grid = self.grid.len();
        let h = self.grid.step();
        let w = &self.checked.wave;
        let k2m2f = (w.kappa * w.kappa + w.m_tilde * w.m_tilde) as f64 + ch.f;
        let mut worst: f64 = 0.0;
        for &(i, y, t) in samples {
            if i < 2 || i + 2 >= n_grid {
                return Err(Error::Domain(format!("residual sample index {i} too close to the grid ends")));
            }
            let x = self.grid.x(i);
            let w0 = self.wave_gradient(x, y, t);
            // (Delta - F) psi0 = -(kappa^2 + m^2 + F) psi0
            let mut dt_lap = -k2m2f * w0.psi_t;
            let mut psi_x = Complex64::new(w0.psi_x, 0.0);
            let mut psi_y = Complex64::new(w0.psi_y, 0.0);
            let mut lap_t = ZERO;
            for layer in &self.layers[1..=j.min(self.order())] {
                for ((m, n), c) in &layer.coefficients {
                    let b = c.values()[i];
                    let d = c.derivs().ok_or_else(|| Error::Parameter("missing b'".into()))?;
                    let dd = (-d[i + 2] + 8.0 * d[i + 1] - 8.0 * d[i - 1] + d[i - 2]) / (12.0 * h);
                    let mf = *m as f64;
                    let sn = self.sigma_n(*n);
                    let phase = Complex64::from_polar(1.0, mf * y + sn * t);
                    psi_x += d[i] * phase;
                    psi_y += I * mf * b * phase;
                    lap_t += I * sn * (dd - (mf * mf + ch.f) * b) * phase;
                }
            }
            dt_lap += lap_t.re;
            let (_, gx, gy) = self.bathy.eval_physical(x, y)?;
            let jac = psi_x.re * ch.mu * gy - psi_y.re * ch.mu * gx;
            let r = dt_lap + jac + ch.fcal * psi_x.re;
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    /// Fitted decay rate of `|b^(j)_(m,n)|` for every stored mode of order >= 1.
    pub fn decay_rates(&self) -> Vec<(usize, Mode, f64)> {
        self.layers[1..]
            .iter()
            .flat_map(|l| {
                l.coefficients
                    .iter()
                    .map(move |(k, c)| (l.order, *k, mode_ode::decay_rate(c)))
            })
            .collect()
    }
}

/// A deterministic spread of residual sample points: `nx` grid nodes, `ny`
/// channel positions and times `0, 0.7, 1.9`.
pub fn residual_samples(grid: &Grid, nx: usize, ny: usize) -> Vec<(usize, f64, f64)> {
    let n = grid.len();
    let stride = ((n - 4) / nx.max(1)).max(1);
    let mut out = Vec::new();
    for i in (2..n - 2).step_by(stride) {
        for k in 0..ny {
            let y = 2.0 * PI * (k as f64 + 0.37) / ny as f64;
            for t in [0.0, 0.7, 1.9] {
                out.push((i, y, t));
            }
        }
    }
    out
}

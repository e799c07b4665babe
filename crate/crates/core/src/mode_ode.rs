//! Decaying solutions of `B'' - 2 i alpha B' - beta^2 B = R` on the half line.
//!
//! The solution is assembled from variation of parameters with the
//! integration constants chosen so that no growing homogeneous component
//! survives. With `delta = sqrt(beta^2 - alpha^2)` (principal branch) and
//! `s± = i alpha ± delta`:
//!
//! * hyperbolic (`delta > 0`): `I1(x) = -(1/2δ) ∫_x^∞ e^{s+(x-y)} R`,
//!   `I2(x) = -(1/2δ) ∫_0^x e^{s-(x-y)} R`, i.e. `K2 = 0`;
//! * oscillatory (`delta = i gamma`): `I1` as above and
//!   `I2(x) = (1/2δ) ∫_x^∞ e^{s-(x-y)} R`;
//! * resonant (`delta = 0`): `B(x) = ∫_x^∞ (y - x) e^{i alpha (x-y)} R`.
//!
//! `B = I1 + I2` and `B' = i alpha B + delta (I1 - I2)` in the non-resonant
//! cases; the resonant derivative is `i alpha B - ∫_x^∞ e^{i alpha (x-y)} R`.
//! Every integral is advanced interval by interval with the propagator
//! `e^{±s h}` pointing in its decaying direction, so nothing overflows.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::sampled::{lagrange4_weights, Grid, SampledCoefficient};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeTolerances {
    /// Band on `|beta^2 - alpha^2|` treated as resonant.
    pub tol_case: f64,
    /// Relative size of `R(x_max)` below which the analytic tail is dropped.
    pub tol_tail: f64,
    /// Relative size of `R(x_max)` above which the grid is declared too short.
    pub tol_grid: f64,
}

impl Default for OdeTolerances {
    fn default() -> Self {
        Self {
            tol_case: 1e-9,
            tol_tail: 1e-12,
            tol_grid: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeCase {
    /// `beta < alpha`, `delta = i gamma`.
    Oscillatory,
    /// `beta = alpha`.
    Resonant,
    /// `beta > alpha`, `delta > 0`.
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeCoefficients {
    pub alpha: f64,
    pub beta_sq: f64,
    pub delta: Complex64,
    pub case: OdeCase,
}

pub fn classify(alpha: f64, beta_sq: f64, tol_case: f64) -> Result<OdeCoefficients> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    let gap = beta_sq - alpha * alpha;
    let (case, delta) = if gap.abs() < tol_case {
        (OdeCase::Resonant, Complex64::new(0.0, 0.0))
    } else if gap > 0.0 {
        (OdeCase::Hyperbolic, Complex64::new(gap.sqrt(), 0.0))
    } else {
        (OdeCase::Oscillatory, Complex64::new(0.0, (-gap).sqrt()))
    };
    Ok(OdeCoefficients {
        alpha,
        beta_sq,
        delta,
        case,
    })
}

/// A solved mode. `first`/`second` hold `I1`/`I2` in the non-resonant cases
/// and the moment integrals `∫_x^∞ (y-x) e^{iα(x-y)}R` / `∫_x^∞ e^{iα(x-y)}R`
/// in the resonant case.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub coeffs: OdeCoefficients,
    pub b: SampledCoefficient,
    pub first: Vec<Complex64>,
    pub second: Vec<Complex64>,
    pub k1: Complex64,
    pub k2: Complex64,
}

// 4-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// `R` interpolated at the Gauss nodes of every grid interval.
struct Quadrature {
    h: f64,
    offsets: [f64; 4],
    weights: [f64; 4],
    samples: Vec<[Complex64; 4]>,
}

impl Quadrature {
    fn new(grid: &Grid, rhs: &[Complex64]) -> Self {
        let h = grid.step();
        let n = grid.len();
        let offsets = GL_NODES.map(|t| 0.5 * h * (1.0 + t));
        let weights = GL_WEIGHTS.map(|w| 0.5 * h * w);
        // Interior intervals use nodes i-1..i+2; the two end intervals use
        // one-sided stencils.
        let interior: [[f64; 4]; 4] = offsets.map(|u| lagrange4_weights(1.0 + u / h));
        let left: [[f64; 4]; 4] = offsets.map(|u| lagrange4_weights(u / h));
        let right: [[f64; 4]; 4] = offsets.map(|u| lagrange4_weights(2.0 + u / h));
        let samples = (0..n - 1)
            .map(|i| {
                let (s, w) = if i == 0 {
                    (0, &left)
                } else if i + 2 >= n {
                    (n - 4, &right)
                } else {
                    (i - 1, &interior)
                };
                let mut out = [Complex64::new(0.0, 0.0); 4];
                for k in 0..4 {
                    out[k] = (0..4).map(|j| rhs[s + j] * w[k][j]).sum();
                }
                out
            })
            .collect();
        Self {
            h,
            offsets,
            weights,
            samples,
        }
    }

    /// Per-interval weights for `∫_0^h f(u) R(x_i + u) du`.
    fn kernel(&self, f: impl Fn(f64) -> Complex64) -> [Complex64; 4] {
        std::array::from_fn(|j| f(self.offsets[j]) * self.weights[j])
    }

    fn apply(&self, i: usize, kernel: &[Complex64; 4]) -> Complex64 {
        let s = &self.samples[i];
        s[0] * kernel[0] + s[1] * kernel[1] + s[2] * kernel[2] + s[3] * kernel[3]
    }
}

/// Solves for the decaying solution with `alpha > 0`.
pub fn solve_mode(
    coeffs: &OdeCoefficients,
    rhs: &SampledCoefficient,
    tol: &OdeTolerances,
) -> Result<OdeSolution> {
    let grid = rhs.grid().clone();
    let n = grid.len();
    let zero = Complex64::new(0.0, 0.0);
    let r = rhs.values();
    let sup = rhs.sup_norm();
    if sup == 0.0 {
        return Ok(OdeSolution {
            coeffs: *coeffs,
            b: SampledCoefficient::zeros(grid),
            first: vec![zero; n],
            second: vec![zero; n],
            k1: zero,
            k2: zero,
        });
    }
    let decay = rhs.decay();
    let r_end = r[n - 1];
    let rel_end = r_end.norm() / sup;
    if rel_end > tol.tol_tail && !(decay.rate > 0.0) {
        return Err(Error::Solver(format!(
            "right-hand side has no usable decay envelope (fitted rate {})",
            decay.rate
        )));
    }
    if rel_end > tol.tol_grid {
        return Err(Error::Solver(format!(
            "tail of the right-hand side at x_max is {rel_end:.3e} of its peak; extend grid"
        )));
    }
    // Envelope continuation R(y) = R(x_max) e^{-rate (y - x_max)} beyond the grid.
    let tail = |s: Complex64, power: i32| -> Complex64 {
        if rel_end <= tol.tol_tail {
            zero
        } else {
            r_end / (s + decay.rate).powi(power)
        }
    };

    let quad = Quadrature::new(&grid, r);
    let h = quad.h;
    let alpha = coeffs.alpha;
    let delta = coeffs.delta;
    let ia = I * alpha;

    let (first, second, values, derivs, k1, k2) = match coeffs.case {
        OdeCase::Resonant => {
            let prop = (-ia * h).exp();
            let k0 = quad.kernel(|u| (-ia * u).exp());
            let k1w = quad.kernel(|u| u * (-ia * u).exp());
            let mut p = vec![zero; n];
            let mut q = vec![zero; n];
            p[n - 1] = tail(ia, 1);
            q[n - 1] = tail(ia, 2);
            for i in (0..n - 1).rev() {
                p[i] = prop * p[i + 1] + quad.apply(i, &k0);
                q[i] = prop * (q[i + 1] + h * p[i + 1]) + quad.apply(i, &k1w);
            }
            let values = q.clone();
            let derivs: Vec<Complex64> = q.iter().zip(&p).map(|(qq, pp)| ia * qq - pp).collect();
            let (k1, k2) = (q[0], -p[0]);
            (q, p, values, derivs, k1, k2)
        }
        case => {
            let sp = ia + delta;
            let sm = ia - delta;
            let half = 1.0 / (2.0 * delta);
            let mut i1 = vec![zero; n];
            i1[n - 1] = -half * tail(sp, 1);
            let prop1 = (-sp * h).exp();
            let kern1 = quad.kernel(|u| (-sp * u).exp());
            for i in (0..n - 1).rev() {
                i1[i] = prop1 * i1[i + 1] - half * quad.apply(i, &kern1);
            }
            let mut i2 = vec![zero; n];
            if case == OdeCase::Hyperbolic {
                let prop2 = (sm * h).exp();
                let kern2 = quad.kernel(|u| (sm * (h - u)).exp());
                for i in 0..n - 1 {
                    i2[i + 1] = prop2 * i2[i] - half * quad.apply(i, &kern2);
                }
            } else {
                i2[n - 1] = half * tail(sm, 1);
                let prop2 = (-sm * h).exp();
                let kern2 = quad.kernel(|u| (-sm * u).exp());
                for i in (0..n - 1).rev() {
                    i2[i] = prop2 * i2[i + 1] + half * quad.apply(i, &kern2);
                }
            }
            let values: Vec<Complex64> = i1.iter().zip(&i2).map(|(a, b)| a + b).collect();
            let derivs = derivative_from_parts(coeffs, &values, &i1, &i2);
            let k2 = if case == OdeCase::Hyperbolic { zero } else { i2[0] };
            let k1 = i1[0];
            (i1, i2, values, derivs, k1, k2)
        }
    };
    Ok(OdeSolution {
        coeffs: *coeffs,
        b: SampledCoefficient::new(grid, values, Some(derivs))?,
        first,
        second,
        k1,
        k2,
    })
}

/// Solves the equation for either sign of `alpha`.
///
/// For `alpha < 0` the problem is the complex conjugate of the `|alpha|`
/// problem with right-hand side `conj(R)`.
pub fn solve_signed(
    alpha: f64,
    beta_sq: f64,
    rhs: &SampledCoefficient,
    tol: &OdeTolerances,
) -> Result<OdeSolution> {
    let coeffs = classify(alpha.abs(), beta_sq, tol.tol_case)?;
    if alpha > 0.0 {
        return solve_mode(&coeffs, rhs, tol);
    }
    let sol = solve_mode(&coeffs, &rhs.conj(), tol)?;
    let conj = |v: &[Complex64]| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
    Ok(OdeSolution {
        coeffs: sol.coeffs,
        b: sol.b.conj(),
        first: conj(&sol.first),
        second: conj(&sol.second),
        k1: sol.k1.conj(),
        k2: sol.k2.conj(),
    })
}

/// `B' = i alpha B + delta (I1 - I2)` from stored parts (non-resonant), or
/// `i alpha B - ∫_x^∞ e^{iα(x-y)}R` in the resonant case.
pub fn derivative_from_parts(
    coeffs: &OdeCoefficients,
    b: &[Complex64],
    first: &[Complex64],
    second: &[Complex64],
) -> Vec<Complex64> {
    let ia = I * coeffs.alpha;
    match coeffs.case {
        OdeCase::Resonant => b.iter().zip(second).map(|(bb, p)| ia * bb - p).collect(),
        _ => b
            .iter()
            .zip(first.iter().zip(second))
            .map(|(bb, (a, c))| ia * bb + coeffs.delta * (a - c))
            .collect(),
    }
}

/// Sup over interior nodes of `|B'' - 2 i alpha B' - beta^2 B - R|` where
/// `B''` is a fourth-order central difference of the stored `B'` samples.
///
/// `alpha` carries its sign so conjugated solves can be checked directly.
pub fn residual(b: &SampledCoefficient, alpha: f64, beta_sq: f64, rhs: &SampledCoefficient) -> f64 {
    let Some(d) = b.derivs() else {
        return f64::INFINITY;
    };
    let v = b.values();
    let r = rhs.values();
    let h = b.grid().step();
    let n = v.len();
    let two_ia = 2.0 * I * alpha;
    (2..n - 2)
        .map(|i| {
            let dd = (-d[i + 2] + 8.0 * d[i + 1] - 8.0 * d[i - 1] + d[i - 2]) / (12.0 * h);
            (dd - two_ia * d[i] - beta_sq * v[i] - r[i]).norm()
        })
        .fold(0.0, f64::max)
}

/// Comparison of a solution with the a-priori decay bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Prefactor of the non-resonant bound (infinite in the resonant case).
    pub gfrak: f64,
    /// Constant of the resonant bound `16 M (1+α) ν^{-3} e^{(α+2ν)ρ̂}`.
    pub resonant_constant: f64,
    /// `min_x bound(x) / |B(x)|`; above 1 means the bound holds everywhere.
    pub value_margin: f64,
    pub deriv_margin: f64,
    pub holds: bool,
    /// Fitted decay rate of `|B|` on the grid tail.
    pub fitted_rate: f64,
    pub rate_ok: bool,
}

pub fn bound_certificate(
    sol: &OdeSolution,
    m_bound: f64,
    nu: f64,
    rho_hat: f64,
) -> BoundReport {
    let c = &sol.coeffs;
    let abs_delta = c.delta.norm();
    let delta_minus = abs_delta;
    let delta_plus = if c.case == OdeCase::Oscillatory { abs_delta } else { 0.0 };
    let gfrak = 32.0 * (2.0 + c.alpha) * (c.alpha + 2.0 * nu + delta_plus).exp()
        / (delta_minus * nu.powi(3));
    let resonant_constant =
        16.0 * m_bound * (1.0 + c.alpha) * nu.powi(-3) * ((c.alpha + 2.0 * nu) * rho_hat).exp();
    let (vb, db) = match c.case {
        OdeCase::Resonant => (resonant_constant, resonant_constant),
        _ => (
            gfrak * m_bound / (nu.powi(3) * (1.0 + abs_delta)),
            gfrak * m_bound,
        ),
    };
    let grid = sol.b.grid();
    let derivs = sol.b.derivs().unwrap_or(&[]);
    let mut value_margin = f64::INFINITY;
    let mut deriv_margin = f64::INFINITY;
    for (i, v) in sol.b.values().iter().enumerate() {
        let env = (-0.5 * nu * grid.x(i)).exp();
        if v.norm() > 0.0 {
            value_margin = value_margin.min(vb * env / v.norm());
        }
        if let Some(d) = derivs.get(i) {
            if d.norm() > 0.0 {
                deriv_margin = deriv_margin.min(db * env / d.norm());
            }
        }
    }
    let fitted_rate = decay_rate(&sol.b);
    BoundReport {
        gfrak,
        resonant_constant,
        value_margin,
        deriv_margin,
        holds: value_margin >= 1.0 && deriv_margin >= 1.0,
        fitted_rate,
        rate_ok: fitted_rate >= 0.5 * nu,
    }
}

/// Decay rate of `|c|` from a regression over the grid tail, restricted to
/// samples well above the rounding floor. Identically zero functions decay
/// at an infinite rate.
pub fn decay_rate(c: &SampledCoefficient) -> f64 {
    let grid = c.grid();
    let mags: Vec<f64> = c.values().iter().map(|v| v.norm()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return f64::INFINITY;
    }
    let floor = peak * 1e-13;
    let n = grid.len();
    let usable: Vec<usize> = (n / 4..n).filter(|&i| mags[i] > floor).collect();
    if usable.len() < 8 {
        return f64::INFINITY;
    }
    // the last half of the usable window, which is past the near field
    let window = &usable[usable.len() / 2..];
    let xs: Vec<f64> = window.iter().map(|&i| grid.x(i)).collect();
    let ys: Vec<f64> = window.iter().map(|&i| mags[i]).collect();
    fit::exponential_decay(&xs, &ys).map_or(f64::INFINITY, |(_, r)| r)
}

/// Samples of `(x, Re B, Im B, Re B', Im B')` for debugging dumps.
pub fn dump_csv(sol: &OdeSolution) -> String {
    let mut out = String::from("x,re_b,im_b,re_db,im_db\n");
    let g = sol.b.grid();
    let d = sol.b.derivs().unwrap_or(&[]);
    for (i, v) in sol.b.values().iter().enumerate() {
        let dv = d.get(i).copied().unwrap_or_default();
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            g.x(i),
            v.re,
            v.im,
            dv.re,
            dv.im
        ));
    }
    out
}

/// Convenience for tests and diagnostics: samples `R` from a closure.
pub fn sample_rhs(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> SampledCoefficient {
    let values = grid.points().iter().map(|&x| f(x)).collect();
    SampledCoefficient::new(grid, values, None).expect("length matches grid")
}

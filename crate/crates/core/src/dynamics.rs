//! Streamline integration and the action stability probe.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{FrozenHamiltonian, HamiltonianModel};
use crate::hierarchy::ExpansionState;

/// A planar, possibly time-dependent vector field on `(a, b)` states.
pub trait VelocityField: Sync {
    fn velocity(&self, a: f64, b: f64, t: f64) -> Result<(f64, f64)>;

    /// Conserved quantity, if the field has one.
    fn conserved(&self, _a: f64, _b: f64, _t: f64) -> Option<f64> {
        None
    }
}

/// The travelling wave alone in the Galilean frame, state `(q, p)`.
#[derive(Debug, Clone, Copy)]
pub struct FrozenWaveField(pub FrozenHamiltonian);

impl VelocityField for FrozenWaveField {
    fn velocity(&self, q: f64, p: f64, _t: f64) -> Result<(f64, f64)> {
        let (hq, hp) = self.0.grad(q, p);
        Ok((hp, -hq))
    }

    fn conserved(&self, q: f64, p: f64, _t: f64) -> Option<f64> {
        Some(self.0.value(q, p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// State `(x, y)`.
    Lab,
    /// State `(q, p)` with `q = x + sigma t / kappa`.
    Galilean,
}

/// Geostrophic velocity `xdot = -psi_y`, `ydot = psi_x` of the expansion
/// truncated at `order`.
#[derive(Debug, Clone, Copy)]
pub struct StreamField<'a> {
    pub state: &'a ExpansionState,
    pub order: usize,
    pub frame: Frame,
}

impl VelocityField for StreamField<'_> {
    fn velocity(&self, a: f64, b: f64, t: f64) -> Result<(f64, f64)> {
        let drift = self.state.checked.sigma / self.state.checked.wave.kappa as f64;
        let (x, shift) = match self.frame {
            Frame::Lab => (a, 0.0),
            Frame::Galilean => (a - drift * t, drift),
        };
        if x < 0.0 {
            return Err(Error::Domain(format!("x = {x} left the channel")));
        }
        let g = self.state.gradient(x, b, t, self.order)?;
        Ok((shift - g.psi_y, g.psi_x))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<(f64, f64)>,
    /// Samples of the conserved quantity, empty when the field has none.
    pub conserved: Vec<f64>,
    /// Set when the orbit left the domain before the final time.
    pub truncated: bool,
}

impl Trajectory {
    pub fn last(&self) -> (f64, f64) {
        *self.states.last().expect("trajectories hold the start point")
    }

    /// `t, a, b[, conserved]` with 17 significant digits.
    pub fn to_csv(&self, names: (&str, &str)) -> String {
        let with_c = !self.conserved.is_empty();
        let mut out = format!("t,{},{}{}\n", names.0, names.1, if with_c { ",conserved" } else { "" });
        for (k, (t, (a, b))) in self.times.iter().zip(&self.states).enumerate() {
            let _ = write!(out, "{t:.16e},{a:.16e},{b:.16e}");
            if with_c {
                let _ = write!(out, ",{:.16e}", self.conserved[k]);
            }
            out.push('\n');
        }
        out
    }

    /// Largest `|c(t) - c(t0)|` of the conserved quantity.
    pub fn conserved_drift(&self) -> f64 {
        let Some(c0) = self.conserved.first() else {
            return 0.0;
        };
        self.conserved.iter().map(|c| (c - c0).abs()).fold(0.0, f64::max)
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(
    f: &dyn Fn(f64, (f64, f64)) -> Result<(f64, f64)>,
    t: f64,
    z: (f64, f64),
    h: f64,
) -> Result<(f64, f64)> {
    let add = |z: (f64, f64), k: (f64, f64), s: f64| (z.0 + s * k.0, z.1 + s * k.1);
    let k1 = f(t, z)?;
    let k2 = f(t + 0.5 * h, add(z, k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, add(z, k2, 0.5 * h))?;
    let k4 = f(t + h, add(z, k3, h))?;
    Ok((
        z.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        z.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ))
}

fn step_count(t0: f64, t1: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Parameter(format!(
            "need h > 0 and t1 >= t0 (h = {h}, t0 = {t0}, t1 = {t1})"
        )));
    }
    Ok(((t1 - t0) / h).round().max(1.0) as usize)
}

/// Fixed-step RK4 from `t0` to `t1`; the step is adjusted so that an
/// integer number of steps lands on `t1`. Leaving the domain truncates the
/// trajectory instead of failing.
pub fn integrate(
    field: &dyn VelocityField,
    start: (f64, f64),
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<Trajectory> {
    let n = step_count(t0, t1, h)?;
    let h = (t1 - t0) / n as f64;
    let f = |t: f64, z: (f64, f64)| field.velocity(z.0, z.1, t);
    let mut traj = Trajectory::default();
    let record = |traj: &mut Trajectory, t: f64, z: (f64, f64)| {
        traj.times.push(t);
        traj.states.push(z);
        if let Some(c) = field.conserved(z.0, z.1, t) {
            traj.conserved.push(c);
        }
    };
    field.velocity(start.0, start.1, t0)?;
    record(&mut traj, t0, start);
    let mut z = start;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        match rk4_step(&f, t, z, h) {
            Ok(next) if next.0.is_finite() && next.1.is_finite() => {
                z = next;
                record(&mut traj, t0 + (k + 1) as f64 * h, z);
            }
            Ok(_) => return Err(Error::Solver(format!("non-finite state at t = {t}"))),
            Err(Error::Domain(_)) => {
                traj.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    Elliptic,
    Hyperbolic,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Complex64; 2],
    pub kind: PointKind,
}

/// Central-difference Jacobian of the velocity at a frozen time and its
/// eigenvalues.
pub fn linearize(field: &dyn VelocityField, point: (f64, f64), t: f64) -> Result<Linearization> {
    let e = 1e-6;
    let (a, b) = point;
    let (pa, qa) = field.velocity(a + e, b, t)?;
    let (ma, na) = field.velocity(a - e, b, t)?;
    let (pb, qb) = field.velocity(a, b + e, t)?;
    let (mb, nb) = field.velocity(a, b - e, t)?;
    let j = [
        [(pa - ma) / (2.0 * e), (pb - mb) / (2.0 * e)],
        [(qa - na) / (2.0 * e), (qb - nb) / (2.0 * e)],
    ];
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = Complex64::new(0.25 * tr * tr - det, 0.0).sqrt();
    let eigenvalues = [0.5 * tr + disc, 0.5 * tr - disc];
    let scale = j.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let kind = if det.abs() <= 1e-9 * scale.max(1e-300) || scale == 0.0 {
        PointKind::Degenerate
    } else if det > 0.0 {
        PointKind::Elliptic
    } else {
        PointKind::Hyperbolic
    };
    Ok(Linearization {
        jacobian: j,
        eigenvalues,
        kind,
    })
}

/// Mean angular velocity of an orbit about `centre`, from the unwrapped
/// angle between the first and last samples.
pub fn rotation_frequency(traj: &Trajectory, centre: (f64, f64)) -> f64 {
    let mut total = 0.0;
    let angle = |z: &(f64, f64)| (z.1 - centre.1).atan2(z.0 - centre.0);
    let mut prev = angle(&traj.states[0]);
    for z in &traj.states[1..] {
        let a = angle(z);
        let mut d = a - prev;
        d -= 2.0 * std::f64::consts::PI * (d / (2.0 * std::f64::consts::PI)).round();
        total += d;
        prev = a;
    }
    total / (traj.times.last().unwrap() - traj.times[0])
}

/// Sum of the diagonal of the finite-difference Jacobian.
pub fn divergence(field: &dyn VelocityField, a: f64, b: f64, t: f64) -> Result<f64> {
    let l = linearize(field, (a, b), t)?;
    Ok(l.jacobian[0][0] + l.jacobian[1][1])
}

/// Outcome of [`stability_probe`]; the trajectory holds `(phi, I)` with
/// `phi` unwrapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub max_excursion: f64,
    pub trajectory: Trajectory,
}

/// Default probe step `1e-3 * 2 pi / |omega|`.
pub fn default_probe_step(model: &HamiltonianModel) -> f64 {
    1e-3 * 2.0 * std::f64::consts::PI / model.chain.omega().abs()
}

/// Integrates `phidot = dH/dI`, `Idot = -dH/dphi` of the full model over
/// `[t_start, t_start + duration]` and reports `sup |I(t) - I(t_start)|`.
pub fn stability_probe(
    model: &HamiltonianModel,
    i0: f64,
    phi0: f64,
    t_start: f64,
    duration: f64,
    h: f64,
) -> Result<ProbeResult> {
    let (lo, hi) = model.g_interval;
    if !(i0 > lo && i0 < hi) {
        return Err(Error::Domain(format!(
            "initial action {i0} is not inside ({lo}, {hi})"
        )));
    }
    let n = step_count(t_start, t_start + duration, h)?;
    let h = duration / n as f64;
    let f = |t: f64, z: (f64, f64)| -> Result<(f64, f64)> {
        let (_, di, dphi) = model.h1_with_partials(z.1, z.0, t)?;
        Ok((model.h0_prime(z.1) + di, -dphi))
    };
    let mut traj = Trajectory::default();
    traj.times.push(t_start);
    traj.states.push((phi0, i0));
    let mut z = (phi0, i0);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let t = t_start + k as f64 * h;
        z = rk4_step(&f, t, z, h)?;
        if !(z.0.is_finite() && z.1.is_finite()) {
            return Err(Error::Solver(format!("probe produced a non-finite state at t = {t}")));
        }
        worst = worst.max((z.1 - i0).abs());
        traj.times.push(t + h);
        traj.states.push(z);
    }
    Ok(ProbeResult {
        max_excursion: worst,
        trajectory: traj,
    })
}

/// Crossings of `phi = 0 mod 2 pi` in a `(phi, I)` trajectory with unwrapped
/// `phi`, as linearly interpolated `(t, I)` pairs.
pub fn poincare_section(traj: &Trajectory) -> Vec<(f64, f64)> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::new();
    for k in 1..traj.states.len() {
        let (a0, i0) = traj.states[k - 1];
        let (a1, i1) = traj.states[k];
        let (w0, w1) = ((a0 / two_pi).floor(), (a1 / two_pi).floor());
        if w0 != w1 {
            let target = two_pi * w0.max(w1);
            let s = (target - a0) / (a1 - a0);
            let t = traj.times[k - 1] + s * (traj.times[k] - traj.times[k - 1]);
            out.push((t, i0 + s * (i1 - i0)));
        }
    }
    out
}

pub fn section_csv(section: &[(f64, f64)]) -> String {
    let mut out = String::from("t,I\n");
    for (t, i) in section {
        let _ = writeln!(out, "{t:.16e},{i:.16e}");
    }
    out
}

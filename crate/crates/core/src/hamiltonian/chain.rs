//! Canonical chain from channel coordinates to action-angle variables.
//!
//! States are written `(coordinate, momentum)`: `(x, y)`, `(q, p)`, `(Q, P)`,
//! `(phi, I)`. The factors are
//!
//! * Galilean: `q = x + sigma t / kappa`, `p = y`, Hamiltonian
//!   `sigma p / kappa - psi`;
//! * shift: `p' = p - p_e`;
//! * scale: `q'' = kappa q`, `p'' = p' / kappa`;
//! * reflect: `Q = q''`, `P = -kappa m~ p''`, valence `-kappa m~`;
//! * Birkhoff: near-identity, valence 1;
//! * action-angle: `phi = atan2(Q, P)`, `I = c (P^2 + Q^2) / 2` with
//!   `c = -sigma lambda`, valence `c`.
//!
//! A map of valence `v` multiplies the Hamiltonian by `v`. The reflection
//! puts the elliptic point `p_e = m~^{-1} arccos(sigma / (kappa m~ A))` at the
//! origin with local Hamiltonian `sigma [P - (sin P + lambda cos P) cos Q]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::birkhoff::NormalForm;
use super::poly2::{local_hamiltonian_taylor, CPoly};
use crate::error::{Error, Result};
use crate::model::{CheckedConfig, WaveParams};

type Point = (f64, f64);

/// Default truncation degree of the normal form.
pub const DEFAULT_DEGREE: u32 = 6;

/// The Galilean-frame travelling-wave Hamiltonian
/// `(sigma / kappa) p - A sin(m~ p) cos(kappa q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenHamiltonian {
    pub sigma: f64,
    pub kappa: f64,
    pub m_tilde: f64,
    pub amplitude: f64,
}

impl FrozenHamiltonian {
    pub fn new(wave: &WaveParams, sigma: f64) -> Self {
        Self {
            sigma,
            kappa: wave.kappa as f64,
            m_tilde: wave.m_tilde as f64,
            amplitude: wave.amplitude,
        }
    }

    pub fn value(&self, q: f64, p: f64) -> f64 {
        self.sigma * p / self.kappa
            - self.amplitude * (self.m_tilde * p).sin() * (self.kappa * q).cos()
    }

    /// `(dH/dq, dH/dp)`.
    pub fn grad(&self, q: f64, p: f64) -> (f64, f64) {
        let (a, k, m) = (self.amplitude, self.kappa, self.m_tilde);
        (
            a * k * (m * p).sin() * (k * q).sin(),
            self.sigma / k - a * m * (m * p).cos() * (k * q).cos(),
        )
    }

    /// `[[H_qq, H_qp], [H_pq, H_pp]]`.
    pub fn hessian(&self, q: f64, p: f64) -> [[f64; 2]; 2] {
        let (a, k, m) = (self.amplitude, self.kappa, self.m_tilde);
        let (sp, cp) = (m * p).sin_cos();
        let (sq, cq) = (k * q).sin_cos();
        let qq = a * k * k * sp * cq;
        let qp = a * k * m * cp * sq;
        let pp = a * m * m * sp * cq;
        [[qq, qp], [qp, pp]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Elliptic,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub q: f64,
    pub p: f64,
    pub kind: EquilibriumKind,
    /// Determinant of the Hessian; positive at a centre, negative at a saddle.
    pub hessian_det: f64,
}

/// The four equilibria `(q, p) = (0, ±p_e)` and `(±q_h, 0)` with
/// `p_e = m~^{-1} arccos c`, `q_h = kappa^{-1} arccos c`,
/// `c = sigma / (kappa m~ A)`, classified from the Hessian.
pub fn equilibria(wave: &WaveParams, sigma: f64) -> Result<[Equilibrium; 4]> {
    let h = FrozenHamiltonian::new(wave, sigma);
    let c = sigma / (h.kappa * h.m_tilde * h.amplitude);
    if !(c.abs() <= 1.0) {
        return Err(Error::Parameter(format!(
            "|sigma / (kappa m A)| = {} exceeds 1: no equilibria",
            c.abs()
        )));
    }
    let ac = c.acos();
    let (pe, qh) = (ac / h.m_tilde, ac / h.kappa);
    let classify = |q: f64, p: f64, label: EquilibriumKind| {
        let m = h.hessian(q, p);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let kind = if det > 0.0 {
            EquilibriumKind::Elliptic
        } else if det < 0.0 {
            EquilibriumKind::Hyperbolic
        } else {
            label
        };
        Equilibrium {
            q,
            p,
            kind,
            hessian_det: det,
        }
    };
    Ok([
        classify(0.0, pe, EquilibriumKind::Elliptic),
        classify(0.0, -pe, EquilibriumKind::Elliptic),
        classify(qh, 0.0, EquilibriumKind::Hyperbolic),
        classify(-qh, 0.0, EquilibriumKind::Hyperbolic),
    ])
}

/// `(I, phi)` from `(P, Q)`; `scale = -sigma lambda` must be positive.
pub fn to_action_angle(p: f64, q: f64, scale: f64) -> Result<(f64, f64)> {
    check_scale(scale)?;
    let phi = if p == 0.0 && q == 0.0 { 0.0 } else { q.atan2(p) };
    Ok((0.5 * scale * (p * p + q * q), phi))
}

/// `(P, Q)` from `(I, phi)`.
pub fn from_action_angle(i: f64, phi: f64, scale: f64) -> Result<(f64, f64)> {
    check_scale(scale)?;
    if i < 0.0 {
        return Err(Error::Domain(format!("negative action {i}")));
    }
    let r = (2.0 * i / scale).sqrt();
    Ok((r * phi.cos(), r * phi.sin()))
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0) {
        return Err(Error::Parameter(format!(
            "action scale -sigma lambda must be positive (got {scale})"
        )));
    }
    Ok(())
}

/// One planar factor of the chain, for canonicity checks.
pub struct Factor<'a> {
    pub name: &'static str,
    pub valence: f64,
    pub map: Box<dyn Fn(f64, f64) -> (f64, f64) + 'a>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalChain {
    pub wave: WaveParams,
    pub sigma: f64,
    pub lambda: f64,
    /// `p_e^+`.
    pub p_e: f64,
    /// `-sigma lambda`.
    pub scale: f64,
    pub normal_form: NormalForm,
    /// Validity radius in normal-form coordinates.
    pub radius: f64,
    old_from_new: CPoly,
    new_from_old: CPoly,
}

/// Builds the chain and the Birkhoff normal form of degree `degree`.
pub fn normal_form_chain(checked: &CheckedConfig, degree: u32) -> Result<CanonicalChain> {
    let sigma = checked.sigma;
    let lambda = checked.lambda_ell();
    if !(lambda > 0.0) {
        return Err(Error::NormalForm(
            "degenerate ellipticity: lambda = 0".into(),
        ));
    }
    let w = checked.wave;
    let c = sigma / ((w.kappa * w.m_tilde) as f64 * w.amplitude);
    let p_e = c.acos() / w.m_tilde as f64;
    let taylor = local_hamiltonian_taylor(sigma, lambda, degree);
    let normal_form = NormalForm::compute(&taylor, degree)?;
    let radius = normal_form.channel_validity_radius(sigma, lambda)?;
    Ok(CanonicalChain {
        wave: w,
        sigma,
        lambda,
        p_e,
        scale: -sigma * lambda,
        old_from_new: normal_form.old_from_new_poly(),
        new_from_old: normal_form.new_from_old_poly(),
        normal_form,
        radius,
    })
}

impl CanonicalChain {
    fn kappa(&self) -> f64 {
        self.wave.kappa as f64
    }

    fn m(&self) -> f64 {
        self.wave.m_tilde as f64
    }

    /// Linear frequency `sigma lambda`.
    pub fn omega(&self) -> f64 {
        self.sigma * self.lambda
    }

    /// Combined valence from `(q, p)` to `(phi, I)`.
    pub fn valence(&self) -> f64 {
        -self.kappa() * self.m() * self.scale
    }

    pub fn galilean(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        (x + self.sigma * t / self.kappa(), y)
    }

    pub fn galilean_inv(&self, q: f64, p: f64, t: f64) -> (f64, f64) {
        (q - self.sigma * t / self.kappa(), p)
    }

    /// `(q, p) -> (Q, P)` through shift, scale and reflection.
    pub fn to_local(&self, q: f64, p: f64) -> (f64, f64) {
        (self.kappa() * q, -self.m() * (p - self.p_e))
    }

    pub fn from_local(&self, big_q: f64, big_p: f64) -> (f64, f64) {
        (big_q / self.kappa(), self.p_e - big_p / self.m())
    }

    /// `(Q, P) -> (Q^, P^)` via the time-one flows.
    pub fn birkhoff(&self, big_q: f64, big_p: f64) -> (f64, f64) {
        let (p, q) = self.normal_form.new_from_old(big_p, big_q);
        (q, p)
    }

    pub fn birkhoff_inv(&self, big_q: f64, big_p: f64) -> (f64, f64) {
        let (p, q) = self.normal_form.old_from_new(big_p, big_q);
        (q, p)
    }

    /// Normal-form angular frequency of the frozen orbit through `(q, p)`.
    pub fn orbit_frequency(&self, q: f64, p: f64) -> f64 {
        let (lq, lp) = self.to_local(q, p);
        let (nq, np) = self.birkhoff(lq, lp);
        self.normal_form.frequency(nq * nq + np * np)
    }

    /// Truncated-polynomial versions of the Birkhoff map and its inverse.
    pub fn birkhoff_poly(&self, big_q: f64, big_p: f64) -> (f64, f64) {
        let z = Complex64::new(big_p, big_q);
        let w = self.new_from_old.eval(z, z.conj());
        (w.im, w.re)
    }

    pub fn birkhoff_inv_poly(&self, big_q: f64, big_p: f64) -> (f64, f64) {
        let z = Complex64::new(big_p, big_q);
        let w = self.old_from_new.eval(z, z.conj());
        (w.im, w.re)
    }

    /// `(x, y, t) -> (phi, I)`.
    pub fn forward(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        let (q, p) = self.galilean(x, y, t);
        let (lq, lp) = self.to_local(q, p);
        let (nq, np) = self.birkhoff(lq, lp);
        let (i, phi) = to_action_angle(np, nq, self.scale)?;
        Ok((phi, i))
    }

    /// `(phi, I, t) -> (x, y)`.
    pub fn inverse(&self, phi: f64, i: f64, t: f64) -> Result<(f64, f64)> {
        let (np, nq) = from_action_angle(i, phi, self.scale)?;
        let (lq, lp) = self.birkhoff_inv(nq, np);
        let (q, p) = self.from_local(lq, lp);
        Ok(self.galilean_inv(q, p, t))
    }

    /// Channel point from `(I, phi, t)` through the truncated Birkhoff
    /// inverse, with `d(x, y)/dI` and `d(x, y)/dphi`.
    pub fn inverse_poly_with_partials(
        &self,
        i: f64,
        phi: f64,
        t: f64,
    ) -> Result<(Point, Point, Point)> {
        if !(i > 0.0) {
            return Err(Error::Domain(format!("action {i} must be positive")));
        }
        let r = (2.0 * i / self.scale).sqrt();
        let xi = Complex64::from_polar(r, phi);
        let (z, dxi, deta) = self.old_from_new.eval_with_grad(xi, xi.conj());
        let iu = Complex64::new(0.0, 1.0);
        let d_phi = dxi * iu * xi - deta * iu * xi.conj();
        let d_i = (dxi * xi + deta * xi.conj()) / (2.0 * i);
        // z = P + iQ; x = Q / kappa - sigma t / kappa; y = p_e - P / m
        let (k, m) = (self.kappa(), self.m());
        let point = (z.im / k - self.sigma * t / k, self.p_e - z.re / m);
        Ok((point, (d_i.im / k, -d_i.re / m), (d_phi.im / k, -d_phi.re / m)))
    }

    /// `H0(I)` coefficients: `H0 = sum_k e_k I^k`, `e_1 = omega`.
    pub fn h0_coefficients(&self) -> Vec<f64> {
        let c = self.scale;
        self.normal_form
            .radial
            .iter()
            .enumerate()
            .map(|(k, h)| c * h * (2.0 / c).powi(k as i32 + 1))
            .collect()
    }

    /// Admissible actions `(0, 0.8 c R^2 / 2)`.
    pub fn g_interval(&self) -> (f64, f64) {
        (0.0, 0.8 * 0.5 * self.scale * self.radius * self.radius)
    }

    /// The planar factors at a frozen time `t`, each from the previous
    /// factor's output.
    pub fn factors(&self, t: f64) -> Vec<Factor<'_>> {
        let k = self.kappa();
        let m = self.m();
        vec![
            Factor {
                name: "galilean",
                valence: 1.0,
                map: Box::new(move |x, y| self.galilean(x, y, t)),
            },
            Factor {
                name: "shift",
                valence: 1.0,
                map: Box::new(move |q, p| (q, p - self.p_e)),
            },
            Factor {
                name: "scale",
                valence: 1.0,
                map: Box::new(move |q, p| (k * q, p / k)),
            },
            Factor {
                name: "reflect",
                valence: -k * m,
                map: Box::new(move |q, p| (q, -k * m * p)),
            },
            Factor {
                name: "birkhoff",
                valence: 1.0,
                map: Box::new(move |q, p| self.birkhoff(q, p)),
            },
            Factor {
                name: "action_angle",
                valence: self.scale,
                map: Box::new(move |q, p| {
                    let (i, phi) = to_action_angle(p, q, self.scale).unwrap_or((f64::NAN, f64::NAN));
                    (phi, i)
                }),
            },
        ]
    }
}

/// Central-difference Jacobian determinant of a planar map.
pub fn jacobian_det(map: &dyn Fn(f64, f64) -> (f64, f64), a: f64, b: f64, h: f64) -> f64 {
    let (xp, yp) = map(a + h, b);
    let (xm, ym) = map(a - h, b);
    let (xq, yq) = map(a, b + h);
    let (xn, yn) = map(a, b - h);
    let j11 = (xp - xm) / (2.0 * h);
    let j21 = (yp - ym) / (2.0 * h);
    let j12 = (xq - xn) / (2.0 * h);
    let j22 = (yq - yn) / (2.0 * h);
    j11 * j22 - j12 * j21
}

/// As [`jacobian_det`], with first-component differences wrapped into
/// `(-pi, pi]` so that angle outputs do not jump across the branch cut.
fn jacobian_det_angle(map: &dyn Fn(f64, f64) -> (f64, f64), a: f64, b: f64, h: f64) -> f64 {
    let wrap = |d: f64| d - 2.0 * PI * (d / (2.0 * PI)).round();
    let (xp, yp) = map(a + h, b);
    let (xm, ym) = map(a - h, b);
    let (xq, yq) = map(a, b + h);
    let (xn, yn) = map(a, b - h);
    let j11 = wrap(xp - xm) / (2.0 * h);
    let j21 = (yp - ym) / (2.0 * h);
    let j12 = wrap(xq - xn) / (2.0 * h);
    let j22 = (yq - yn) / (2.0 * h);
    j11 * j22 - j12 * j21
}

/// Deviation `|det J / valence - 1|` per factor and for the composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub per_factor: Vec<(String, f64)>,
    pub composed: f64,
}

impl SymplecticReport {
    pub fn max(&self) -> f64 {
        self.per_factor
            .iter()
            .map(|(_, v)| *v)
            .fold(self.composed, f64::max)
    }
}

/// Checks canonicity at channel points `(x, y)` at time `t`.
pub fn symplectic_check(chain: &CanonicalChain, points: &[(f64, f64)], t: f64) -> SymplecticReport {
    let factors = chain.factors(t);
    let h = 1e-6;
    let mut per: Vec<f64> = vec![0.0; factors.len()];
    let mut composed: f64 = 0.0;
    for &(x, y) in points {
        let mut z = (x, y);
        for (k, f) in factors.iter().enumerate() {
            let det = jacobian_det_angle(&*f.map, z.0, z.1, h);
            per[k] = per[k].max((det / f.valence - 1.0).abs());
            z = (f.map)(z.0, z.1);
        }
        let whole = |a: f64, b: f64| {
            let mut z = (a, b);
            for f in &factors {
                z = (f.map)(z.0, z.1);
            }
            z
        };
        let det = jacobian_det_angle(&whole, x, y, h);
        composed = composed.max((det / chain.valence() - 1.0).abs());
    }
    SymplecticReport {
        per_factor: factors
            .iter()
            .zip(per)
            .map(|(f, v)| (f.name.to_string(), v))
            .collect(),
        composed,
    }
}

/// Channel points whose normal-form images fill the disc of radius
/// `fraction * R`, spread deterministically.
pub fn disc_points(chain: &CanonicalChain, count: usize, fraction: f64, t: f64) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let r = fraction * chain.radius * ((k as f64 + 0.5) / count as f64).sqrt();
            let th = k as f64 * golden;
            let (lq, lp) = chain.birkhoff_inv(r * th.sin(), r * th.cos());
            let (q, p) = chain.from_local(lq, lp);
            chain.galilean_inv(q, p, t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{demo_channel, demo_wave};
    use crate::model::validate_with;

    fn chain() -> CanonicalChain {
        let checked = validate_with(&demo_channel(1e-7), &demo_wave(), false).unwrap();
        normal_form_chain(&checked, DEFAULT_DEGREE).unwrap()
    }

    #[test]
    fn frozen_hamiltonian_gradients() {
        let h = FrozenHamiltonian::new(&demo_wave(), -2.0);
        let eq = equilibria(&demo_wave(), -2.0).unwrap();
        let (gq, gp) = h.grad(eq[0].q, eq[0].p);
        assert!(gq.abs() < 1e-14 && gp.abs() < 1e-14);
        let e = 1e-6;
        for &(q, p) in &[(0.3, 1.1), (-1.2, 2.5)] {
            let (gq, gp) = h.grad(q, p);
            let nq = (h.value(q + e, p) - h.value(q - e, p)) / (2.0 * e);
            let np = (h.value(q, p + e) - h.value(q, p - e)) / (2.0 * e);
            assert!((gq - nq).abs() < 1e-8 && (gp - np).abs() < 1e-8);
        }
        let flat = FrozenHamiltonian { amplitude: 0.0, ..h };
        assert_eq!(flat.value(0.7, 1.5), -2.0 * 1.5 / 2.0);
    }

    #[test]
    fn equilibria_and_classification() {
        // sigma / (kappa m A) = 1/2
        let w = WaveParams { kappa: 1, m_tilde: 1, amplitude: 2.0 };
        let eq = equilibria(&w, 1.0).unwrap();
        assert!((eq[0].p - PI / 3.0).abs() < 1e-15);
        assert!((eq[1].p + PI / 3.0).abs() < 1e-15);
        assert!((eq[2].q - PI / 3.0).abs() < 1e-15);
        let demo = equilibria(&demo_wave(), -2.0).unwrap();
        assert_eq!(demo[0].kind, EquilibriumKind::Elliptic);
        assert_eq!(demo[1].kind, EquilibriumKind::Elliptic);
        assert_eq!(demo[2].kind, EquilibriumKind::Hyperbolic);
        assert_eq!(demo[3].kind, EquilibriumKind::Hyperbolic);
        // boundary case collapses onto the axes
        let edge = equilibria(&WaveParams { kappa: 1, m_tilde: 1, amplitude: 1.0 }, 1.0).unwrap();
        assert!(edge.iter().all(|e| e.p == 0.0 && e.q == 0.0));
        assert!(equilibria(&w, 3.0).is_err());
    }

    #[test]
    fn local_hamiltonian_is_the_transformed_frozen_one() {
        let c = chain();
        let h = FrozenHamiltonian::new(&c.wave, c.sigma);
        let base = h.value(0.0, c.p_e);
        for &(q, p) in &[(0.1, c.p_e + 0.05), (-0.2, c.p_e - 0.1)] {
            let (lq, lp) = c.to_local(q, p);
            let local = super::super::poly2::local_hamiltonian(c.sigma, c.lambda, lp, lq);
            let mult = -(c.wave.kappa * c.wave.m_tilde) as f64;
            assert!((mult * (h.value(q, p) - base) - local).abs() < 1e-12);
        }
    }

    #[test]
    fn action_angle_round_trip() {
        let s = 2.0 * 3f64.sqrt();
        assert_eq!(to_action_angle(0.0, 0.0, s).unwrap(), (0.0, 0.0));
        for &(p, q) in &[(0.3, -0.1), (-0.2, 0.25)] {
            let (i, phi) = to_action_angle(p, q, s).unwrap();
            let (pp, qq) = from_action_angle(i, phi, s).unwrap();
            assert!((pp - p).abs() < 1e-12 && (qq - q).abs() < 1e-12);
        }
        assert!(to_action_angle(0.1, 0.1, -1.0).is_err());
    }

    #[test]
    fn chain_is_canonical_and_invertible() {
        let c = chain();
        let t = 3.0;
        let pts = disc_points(&c, 100, 0.9, t);
        let rep = symplectic_check(&c, &pts, t);
        assert!(rep.max() < 1e-6, "{rep:?}");
        for &(x, y) in &pts {
            let (phi, i) = c.forward(x, y, t).unwrap();
            let (xx, yy) = c.inverse(phi, i, t).unwrap();
            assert!((xx - x).abs() < 1e-8 && (yy - y).abs() < 1e-8);
        }
    }

    #[test]
    fn scale_factor_determinant_is_one() {
        let c = chain();
        let f = &c.factors(0.0)[2];
        assert!((jacobian_det(&*f.map, 0.4, 0.7, 1e-6) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn h0_matches_normal_form() {
        let c = chain();
        let e = c.h0_coefficients();
        assert!((e[0] - c.omega()).abs() < 1e-12);
        for &(p, q) in &[(0.05, 0.02), (0.01, -0.03)] {
            let (i, _) = to_action_angle(p, q, c.scale).unwrap();
            let h0: f64 = e.iter().enumerate().map(|(k, v)| v * i.powi(k as i32 + 1)).sum();
            let nf = c.scale * c.normal_form.radial_value(p * p + q * q);
            assert!((h0 - nf).abs() < 1e-12);
        }
    }

    #[test]
    fn poly_partials_match_finite_differences() {
        let c = chain();
        let (i, phi, t) = (0.3 * c.g_interval().1, 0.7, 2.0);
        let (_, d_i, d_phi) = c.inverse_poly_with_partials(i, phi, t).unwrap();
        let at = |i: f64, phi: f64| c.inverse_poly_with_partials(i, phi, t).unwrap().0;
        let e = 1e-7;
        let (a, b) = (at(i + e * i, phi), at(i - e * i, phi));
        assert!(((a.0 - b.0) / (2.0 * e * i) - d_i.0).abs() < 1e-6);
        assert!(((a.1 - b.1) / (2.0 * e * i) - d_i.1).abs() < 1e-6);
        let (a, b) = (at(i, phi + e), at(i, phi - e));
        assert!(((a.0 - b.0) / (2.0 * e) - d_phi.0).abs() < 1e-6);
        assert!(((a.1 - b.1) / (2.0 * e) - d_phi.1).abs() < 1e-6);
    }
}

//! Birkhoff normalisation at an elliptic origin by Lie series.
//!
//! At degree `k` the generator `chi_k` removes every monomial `xi^a eta^b`
//! with `a != b` through `{xi^a eta^b, H2} = i omega (a - b) xi^a eta^b`. The
//! transformed Hamiltonian is `H o Phi_3 o ... o Phi_N`, where `Phi_k` is the
//! time-one flow of `chi_k`; old coordinates are therefore
//! `Phi_3(...Phi_N(new))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly2::{local_hamiltonian, CPoly, Poly2};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative remainder allowed inside the validity disc.
pub const VALIDITY_TOL: f64 = 1e-3;
/// Substeps of the time-one flows.
const FLOW_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub degree: u32,
    /// Linear frequency, twice the coefficient of `P^2 + Q^2`.
    pub omega: f64,
    pub original: CPoly,
    /// Transformed Hamiltonian, kept in full so that leftover angle
    /// dependence can be measured rather than assumed away.
    pub normalized: CPoly,
    /// `chi_3 ..= chi_N`.
    pub generators: Vec<CPoly>,
    /// `h_k`, the coefficient of `(P^2 + Q^2)^k`, for `k = 1 ..= N/2`.
    pub radial: Vec<f64>,
    /// Largest surviving coefficient with `a != b`.
    pub angle_residue: f64,
}

impl NormalForm {
    /// Normalises a real Taylor polynomial whose quadratic part is
    /// `(omega/2)(P^2 + Q^2)` and which has no constant or linear terms.
    pub fn compute(h: &Poly2, degree: u32) -> Result<Self> {
        if degree < 4 {
            return Err(Error::NormalForm(format!(
                "degree {degree} < 4 leaves nothing to normalise"
            )));
        }
        let (h20, h02, h11) = (h.coeff(2, 0), h.coeff(0, 2), h.coeff(1, 1));
        let omega = h20 + h02;
        let scale = h20.abs().max(h02.abs()).max(1.0);
        if (h20 - h02).abs() > 1e-12 * scale || h11.abs() > 1e-12 * scale {
            return Err(Error::NormalForm(
                "quadratic part is not a multiple of P^2 + Q^2".into(),
            ));
        }
        if omega == 0.0 {
            return Err(Error::NormalForm("degenerate ellipticity: omega = 0".into()));
        }
        let mut trunc = Poly2::new(degree);
        for ((a, b), c) in &h.coeffs {
            if a + b >= 2 {
                trunc.add_term(*a, *b, *c);
            }
        }
        let original = trunc.to_complex();
        let mut current = original.clone();
        let mut generators = Vec::new();
        for k in 3..=degree {
            let mut chi = CPoly::new(degree);
            for ((a, b), c) in &current.homogeneous(k).coeffs {
                if a != b {
                    chi.add_term(*a, *b, c / (I * omega * (*a as f64 - *b as f64)));
                }
            }
            current = current.lie_exp(&chi);
            generators.push(chi);
        }
        let radial = (1..=degree / 2).map(|k| current.coeff(k, k).re).collect();
        let angle_residue = current.angle_dependence();
        Ok(Self {
            degree,
            omega,
            original,
            normalized: current,
            generators,
            radial,
            angle_residue,
        })
    }

    /// `alpha_k`, the coefficient of `(P^2 + Q^2)^{k+1}`, for `k >= 1`.
    pub fn alphas(&self) -> Vec<f64> {
        self.radial.iter().skip(1).copied().collect()
    }

    /// `sum_k h_k rho^k` with `rho = P^2 + Q^2`.
    pub fn radial_value(&self, rho: f64) -> f64 {
        self.radial
            .iter()
            .enumerate()
            .map(|(k, h)| h * rho.powi(k as i32 + 1))
            .sum()
    }

    /// Angular frequency of the normalised flow at `rho`, `2 dH/drho`.
    pub fn frequency(&self, rho: f64) -> f64 {
        2.0 * self
            .radial
            .iter()
            .enumerate()
            .map(|(k, h)| (k + 1) as f64 * h * rho.powi(k as i32))
            .sum::<f64>()
    }

    /// Old `xi` as a truncated polynomial in the new `(xi, eta)`.
    pub fn old_from_new_poly(&self) -> CPoly {
        let mut f = CPoly::xi(self.degree);
        for chi in &self.generators {
            f = f.lie_exp(chi);
        }
        f
    }

    /// New `xi` as a truncated polynomial in the old `(xi, eta)`.
    pub fn new_from_old_poly(&self) -> CPoly {
        let mut f = CPoly::xi(self.degree);
        for chi in self.generators.iter().rev() {
            f = f.lie_exp(&chi.scaled(Complex64::new(-1.0, 0.0)));
        }
        f
    }

    /// Old `(P, Q)` from new, through the time-one flows.
    pub fn old_from_new(&self, p: f64, q: f64) -> (f64, f64) {
        let mut z = Complex64::new(p, q);
        for chi in self.generators.iter().rev() {
            z = flow(chi, z, 1.0);
        }
        (z.re, z.im)
    }

    /// New `(P, Q)` from old; exact inverse of [`Self::old_from_new`] up to
    /// the implicit-stage tolerance.
    pub fn new_from_old(&self, p: f64, q: f64) -> (f64, f64) {
        let mut z = Complex64::new(p, q);
        for chi in &self.generators {
            z = flow(chi, z, -1.0);
        }
        (z.re, z.im)
    }

    /// Largest `|H(old(new)) - NF(new)| / |H2(new)|` on a circle of radius `r`
    /// in normal-form coordinates, with `H` the closed form supplied.
    pub fn remainder_on_circle(&self, r: f64, h: &dyn Fn(f64, f64) -> f64) -> f64 {
        let h2 = 0.5 * self.omega.abs() * r * r;
        (0..32)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
                let (p, q) = (r * th.cos(), r * th.sin());
                let (po, qo) = self.old_from_new(p, q);
                (h(po, qo) - self.radial_value(r * r)).abs() / h2
            })
            .fold(0.0, f64::max)
    }

    /// Largest dyadic `r <= 1` whose circle passes [`VALIDITY_TOL`].
    pub fn validity_radius(&self, h: &dyn Fn(f64, f64) -> f64) -> Result<f64> {
        let mut r = 1.0;
        for _ in 0..20 {
            if self.remainder_on_circle(r, h) < VALIDITY_TOL {
                return Ok(r);
            }
            r *= 0.5;
        }
        Err(Error::NormalForm(
            "no radius above 2^-20 keeps the normal-form remainder small".into(),
        ))
    }

    /// Validity radius for the local channel Hamiltonian.
    pub fn channel_validity_radius(&self, sigma: f64, lambda: f64) -> Result<f64> {
        self.validity_radius(&|p, q| local_hamiltonian(sigma, lambda, p, q))
    }
}

/// Time-`t` flow of `d xi/ds = {xi, chi} = 2i d chi/d eta` by the two-stage
/// Gauss-Legendre method (symplectic and symmetric, so the `-t` flow inverts
/// the `+t` flow to the stage tolerance).
pub fn flow(chi: &CPoly, z0: Complex64, t: f64) -> Complex64 {
    let d_eta = chi.d_eta();
    let field = |z: Complex64| 2.0 * I * d_eta.eval(z, z.conj());
    let h = t / FLOW_STEPS as f64;
    let r3 = 3f64.sqrt() / 6.0;
    let a = [[0.25, 0.25 - r3], [0.25 + r3, 0.25]];
    let mut z = z0;
    for _ in 0..FLOW_STEPS {
        let mut k = [field(z); 2];
        for _ in 0..100 {
            let next = [
                field(z + h * (a[0][0] * k[0] + a[0][1] * k[1])),
                field(z + h * (a[1][0] * k[0] + a[1][1] * k[1])),
            ];
            let change = (next[0] - k[0]).norm().max((next[1] - k[1]).norm());
            k = next;
            if change <= 1e-16 * (1.0 + k[0].norm()) {
                break;
            }
        }
        z += h * 0.5 * (k[0] + k[1]);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::super::poly2::local_hamiltonian_taylor;
    use super::*;

    const SIGMA: f64 = -2.0;

    fn lambda() -> f64 {
        3f64.sqrt()
    }

    fn nf(deg: u32) -> NormalForm {
        NormalForm::compute(&local_hamiltonian_taylor(SIGMA, lambda(), deg), deg).unwrap()
    }

    #[test]
    fn quadratic_and_frequency() {
        let n = nf(6);
        assert!((n.radial[0] - SIGMA * lambda() / 2.0).abs() < 1e-12);
        assert!((n.omega - SIGMA * lambda()).abs() < 1e-12);
        assert!((n.omega + 3.464_101_615_137_754).abs() < 1e-12);
        assert!(n.angle_residue < 1e-10, "{}", n.angle_residue);
        assert_eq!(n.alphas().len(), 2);
    }

    #[test]
    fn low_degree_refused() {
        let h = local_hamiltonian_taylor(SIGMA, lambda(), 3);
        assert!(matches!(NormalForm::compute(&h, 3), Err(Error::NormalForm(_))));
    }

    #[test]
    fn flows_invert_each_other() {
        let n = nf(6);
        for &(p, q) in &[(0.1, 0.05), (-0.3, 0.2), (0.02, -0.25)] {
            let (a, b) = n.old_from_new(p, q);
            let (c, d) = n.new_from_old(a, b);
            assert!((c - p).abs() < 1e-13 && (d - q).abs() < 1e-13);
        }
    }

    #[test]
    fn polynomial_maps_agree_with_flows_to_truncation_order() {
        let n = nf(6);
        let fwd = n.old_from_new_poly();
        let mut errs = Vec::new();
        for r in [0.1, 0.05] {
            let (p, q) = (0.6 * r, 0.8 * r);
            let z = fwd.eval(Complex64::new(p, q), Complex64::new(p, -q));
            let (a, b) = n.old_from_new(p, q);
            errs.push((z - Complex64::new(a, b)).norm());
        }
        // first neglected degree is 7
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 6.0, "order {order} from {errs:?}");
    }

    #[test]
    fn normal_form_is_invariant_under_the_new_coordinates() {
        let n = nf(6);
        let h = |p: f64, q: f64| local_hamiltonian(SIGMA, lambda(), p, q);
        let r_small = n.remainder_on_circle(0.2, &h);
        let r_smaller = n.remainder_on_circle(0.1, &h);
        // remainder relative to r^2 scales like r^5
        assert!(r_small / r_smaller > 2f64.powi(4), "{r_small} {r_smaller}");
        let rad = n.channel_validity_radius(SIGMA, lambda()).unwrap();
        assert!(rad > 0.0 && rad <= 1.0);
    }
}

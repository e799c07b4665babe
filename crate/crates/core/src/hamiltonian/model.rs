//! The assembled time-dependent Hamiltonian `H0(I) + eta + H1(I, phi, t)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chain::CanonicalChain;
use crate::error::{Error, Result};
use crate::hierarchy::ExpansionState;

/// `H0` is the normal form re-expressed in `I`; `H1` is the correction
/// streamfunction carried through the chain multipliers. `eta`, the
/// conjugate of `t`, has no dynamics and is not represented.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub chain: CanonicalChain,
    /// `H0 = sum_k h0[k] I^(k+1)`.
    pub h0: Vec<f64>,
    pub g_interval: (f64, f64),
    /// `kappa m~ (-sigma lambda)`: `H1 = h1_scale * psi~`.
    pub h1_scale: f64,
    state: Option<Arc<ExpansionState>>,
    order: usize,
}

/// `state = None` stands for a flat bottom, where `H1` vanishes.
pub fn assemble_model(chain: CanonicalChain, state: Option<Arc<ExpansionState>>) -> HamiltonianModel {
    let order = state.as_ref().map_or(0, |s| s.order());
    HamiltonianModel {
        h0: chain.h0_coefficients(),
        g_interval: chain.g_interval(),
        h1_scale: (chain.wave.kappa * chain.wave.m_tilde) as f64 * chain.scale,
        chain,
        state,
        order,
    }
}

impl HamiltonianModel {
    pub fn h0(&self, i: f64) -> f64 {
        self.h0
            .iter()
            .enumerate()
            .map(|(k, c)| c * i.powi(k as i32 + 1))
            .sum()
    }

    pub fn h0_prime(&self, i: f64) -> f64 {
        self.h0
            .iter()
            .enumerate()
            .map(|(k, c)| (k + 1) as f64 * c * i.powi(k as i32))
            .sum()
    }

    pub fn is_autonomous(&self) -> bool {
        self.state.is_none() || self.order == 0
    }

    /// Earliest time at which the whole validity disc lies in `x >= 0`.
    pub fn earliest_time(&self) -> f64 {
        let k = self.chain.wave.kappa as f64;
        let reach = 2.0 * self.chain.radius / k;
        (reach * k / self.chain.sigma.abs()).max(0.0)
    }

    /// `H1(I, phi, t)`.
    pub fn h1(&self, i: f64, phi: f64, t: f64) -> Result<f64> {
        self.h1_with_partials(i, phi, t).map(|v| v.0)
    }

    /// `(H1, dH1/dI, dH1/dphi)`.
    pub fn h1_with_partials(&self, i: f64, phi: f64, t: f64) -> Result<(f64, f64, f64)> {
        let ((x, y), d_i, d_phi) = self.chain.inverse_poly_with_partials(i, phi, t)?;
        if x < 0.0 {
            return Err(Error::Domain(format!(
                "(I, phi, t) = ({i}, {phi}, {t}) maps to x = {x} outside the channel"
            )));
        }
        let Some(state) = &self.state else {
            return Ok((0.0, 0.0, 0.0));
        };
        let g = state.correction_gradient(x, y, t, self.order)?;
        let s = self.h1_scale;
        Ok((
            s * g.psi,
            s * (g.psi_x * d_i.0 + g.psi_y * d_i.1),
            s * (g.psi_x * d_phi.0 + g.psi_y * d_phi.1),
        ))
    }

    /// `max over phi of |H1(I, phi, t)|` on `n_phi` equally spaced angles.
    pub fn h1_sup(&self, i: f64, t: f64, n_phi: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64;
            worst = worst.max(self.h1(i, phi, t)?.abs());
        }
        Ok(worst)
    }
}

/// Normal-form summary written by the `nf` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfReport {
    pub sigma: f64,
    pub lambda_ell: f64,
    pub omega: f64,
    pub degree: u32,
    /// Coefficient of `P^2 + Q^2`.
    pub quadratic: f64,
    /// Coefficients of `(P^2 + Q^2)^(k+1)`, `k >= 1`.
    pub alpha: Vec<f64>,
    pub h0_coefficients: Vec<f64>,
    pub validity_radius: f64,
    pub g_interval: (f64, f64),
    pub p_e: f64,
    pub angle_residue: f64,
    /// Remainder on the validity circle relative to the quadratic part.
    pub remainder_at_radius: f64,
}

impl NfReport {
    pub fn new(chain: &CanonicalChain) -> Self {
        let nf = &chain.normal_form;
        let (s, l) = (chain.sigma, chain.lambda);
        Self {
            sigma: s,
            lambda_ell: l,
            omega: chain.omega(),
            degree: nf.degree,
            quadratic: nf.radial[0],
            alpha: nf.alphas(),
            h0_coefficients: chain.h0_coefficients(),
            validity_radius: chain.radius,
            g_interval: chain.g_interval(),
            p_e: chain.p_e,
            angle_residue: nf.angle_residue,
            remainder_at_radius: nf.remainder_on_circle(chain.radius, &|p, q| {
                super::poly2::local_hamiltonian(s, l, p, q)
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

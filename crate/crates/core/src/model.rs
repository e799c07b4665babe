//! Physical and wave parameters, the dispersion relation and admissibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationFailure};

/// Channel, scaling and bathymetry-bound constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Geometric constant `F`.
    #[serde(rename = "F")]
    pub f: f64,
    /// Beta-plane constant (negative for waves travelling towards +x).
    #[serde(rename = "Fcal")]
    pub fcal: f64,
    /// Mean depth.
    pub d: f64,
    /// Bathymetry amplitude.
    pub mu: f64,
    /// Bathymetry decay rate in `x`.
    pub nu: f64,
    /// Bathymetry amplitude bound.
    #[serde(rename = "Mcal")]
    pub mcal: f64,
    /// Nominal analyticity width, only used by diagnostics.
    pub rho: f64,
}

/// Travelling-wave numbers and amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub kappa: i32,
    pub m_tilde: i32,
    #[serde(rename = "A")]
    pub amplitude: f64,
}

/// `sigma(kappa) = kappa * Fcal / (m_tilde^2 + kappa^2 + F)`.
pub fn dispersion(f: f64, fcal: f64, kappa: f64, m_tilde: f64) -> Result<f64> {
    let denom = m_tilde * m_tilde + kappa * kappa + f;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Parameter(format!(
            "dispersion denominator m^2 + kappa^2 + F vanishes (F = {f}, kappa = {kappa}, m = {m_tilde})"
        )));
    }
    Ok(kappa * fcal / denom)
}

impl WaveParams {
    pub fn sigma(&self, channel: &ChannelParams) -> Result<f64> {
        dispersion(
            channel.f,
            channel.fcal,
            self.kappa as f64,
            self.m_tilde as f64,
        )
    }

    /// Wave speed for the signed streamwise index `n = ±kappa`.
    pub fn sigma_n(&self, channel: &ChannelParams, n: i32) -> Result<f64> {
        dispersion(channel.f, channel.fcal, n as f64, self.m_tilde as f64)
    }
}

/// Constants entering the a-priori majorant estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantConstants {
    /// `|Fcal / (2 sigma)|`.
    pub alpha: f64,
    /// Smallest `|delta_m|` over non-resonant `m != 0`.
    pub delta_minus: f64,
    /// Largest `|delta_m|` over oscillatory modes (0 if there are none).
    pub delta_plus: f64,
    /// Index attaining `delta_minus`.
    pub m_star: i32,
    /// Prefactor of the per-mode solution bound.
    pub gfrak: f64,
}

impl MajorantConstants {
    pub fn new(channel: &ChannelParams, sigma: f64) -> Result<Self> {
        let alpha = (channel.fcal / (2.0 * sigma)).abs();
        let alpha_sq = alpha * alpha;
        let mut delta_minus = f64::INFINITY;
        let mut delta_plus: f64 = 0.0;
        let mut m_star = 0;
        // |delta_m| grows monotonically once F + m^2 > alpha^2, so scanning
        // just past 2 alpha covers the infimum.
        let m_end = (2.0 * alpha + channel.f.abs().sqrt()).ceil() as i32 + 2;
        for m in 1..=m_end.max(2) {
            let beta_sq = channel.f + (m * m) as f64;
            let gap = beta_sq - alpha_sq;
            if gap == 0.0 {
                continue;
            }
            let abs_delta = gap.abs().sqrt();
            if abs_delta < delta_minus {
                delta_minus = abs_delta;
                m_star = m;
            }
            if gap < 0.0 {
                delta_plus = delta_plus.max(abs_delta);
            }
        }
        if !delta_minus.is_finite() {
            return Err(Error::Parameter(
                "every mode is resonant; delta_- undefined".into(),
            ));
        }
        let nu = channel.nu;
        let gfrak = 32.0 * (2.0 + alpha) * (alpha + 2.0 * nu + delta_plus).exp()
            / (delta_minus * nu.powi(3));
        Ok(Self {
            alpha,
            delta_minus,
            delta_plus,
            m_star,
            gfrak,
        })
    }

    /// Contraction factor `L(mu)` of the majorant sequence.
    ///
    /// Uses `|sigma|`: with `sigma < 0` the raw expression would be negative.
    pub fn contraction(&self, channel: &ChannelParams, sigma: f64) -> f64 {
        32.0 * channel.mu * channel.mcal * self.gfrak * (self.m_star.abs() as f64 + 1.0)
            / (sigma.abs() * channel.rho * channel.rho)
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedConfig {
    pub channel: ChannelParams,
    pub wave: WaveParams,
    pub sigma: f64,
    pub majorant: MajorantConstants,
    /// `L(mu)`.
    pub l_mu: f64,
    /// Whether `L(mu) <= 1/2`.
    pub threshold_ok: bool,
}

impl CheckedConfig {
    /// `alpha` for the `n = +kappa` family (positive).
    pub fn alpha(&self) -> f64 {
        self.channel.fcal / (2.0 * self.sigma)
    }

    /// Ellipticity constant `sqrt((A kappa m / sigma)^2 - 1)`.
    pub fn lambda_ell(&self) -> f64 {
        let r = self.wave.amplitude * (self.wave.kappa * self.wave.m_tilde) as f64 / self.sigma;
        (r * r - 1.0).max(0.0).sqrt()
    }
}

/// Checks every admissibility condition and evaluates `L(mu)`.
///
/// All failing structural conditions are reported together. The majorant
/// threshold is reported as a failure only when `enforce_threshold` is set,
/// so diagnostic sweeps over larger `mu` can still obtain a checked config.
pub fn validate_with(
    channel: &ChannelParams,
    wave: &WaveParams,
    enforce_threshold: bool,
) -> Result<CheckedConfig> {
    let mut failures = Vec::new();
    if wave.kappa <= 0 || wave.m_tilde <= 0 {
        return Err(Error::Parameter(format!(
            "wave numbers must be positive (kappa = {}, m_tilde = {})",
            wave.kappa, wave.m_tilde
        )));
    }
    let sigma = wave.sigma(channel)?;
    if !(channel.fcal < 0.0) {
        failures.push(ValidationFailure::WaveDirection(channel.fcal));
    }
    let bound = (wave.kappa * wave.m_tilde) as f64 * wave.amplitude;
    if -sigma > bound {
        failures.push(ValidationFailure::Ellipticity {
            neg_sigma: -sigma,
            bound,
        });
    }
    if !(channel.mu > 0.0 && channel.mu < channel.d) {
        failures.push(ValidationFailure::DepthOrdering {
            mu: channel.mu,
            d: channel.d,
        });
    }
    if !(channel.nu > 0.0) {
        failures.push(ValidationFailure::Decay(channel.nu));
    }
    if !(channel.mcal > 0.0) {
        failures.push(ValidationFailure::AmplitudeBound(channel.mcal));
    }
    if !(channel.rho > 0.0 && channel.rho <= 0.5) {
        failures.push(ValidationFailure::Width(channel.rho));
    }
    if !failures.is_empty() {
        return Err(Error::Validation(failures));
    }
    let majorant = MajorantConstants::new(channel, sigma)?;
    let l_mu = majorant.contraction(channel, sigma);
    let threshold_ok = l_mu <= 0.5;
    if enforce_threshold && !threshold_ok {
        return Err(Error::Validation(vec![
            ValidationFailure::MajorantThreshold(l_mu),
        ]));
    }
    Ok(CheckedConfig {
        channel: *channel,
        wave: *wave,
        sigma,
        majorant,
        l_mu,
        threshold_ok,
    })
}

pub fn validate(channel: &ChannelParams, wave: &WaveParams) -> Result<CheckedConfig> {
    validate_with(channel, wave, true)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// F = 1, Fcal = -6, kappa = 2, m = 1 gives sigma = -2; A = 2 gives lambda = sqrt(3).
    pub fn demo_channel(mu: f64) -> ChannelParams {
        ChannelParams {
            f: 1.0,
            fcal: -6.0,
            d: 0.1,
            mu,
            nu: 1.0,
            mcal: 1.0,
            rho: 0.5,
        }
    }

    pub fn demo_wave() -> WaveParams {
        WaveParams {
            kappa: 2,
            m_tilde: 1,
            amplitude: 2.0,
        }
    }
}

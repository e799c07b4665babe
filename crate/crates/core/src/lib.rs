//! Order-by-order construction of the travelling-wave streamfunction of the
//! linear quasi-geostrophic shallow-water equation over a quasi-flat,
//! exponentially decaying bathymetry, together with the canonical machinery
//! that casts the streamlines near the elliptic equilibrium into a
//! nearly-integrable Hamiltonian with aperiodic time dependence.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`], [`sampled`], [`bathymetry`]: parameters, sampled functions of
//!   `x` on the channel grid, and the Fourier representation of the bottom.
//! * [`mode_ode`]: the per-mode second order complex ODE and its decaying
//!   solution.
//! * [`hierarchy`]: brackets, layers, reconstruction and residuals.
//! * [`hamiltonian`]: polynomial algebra, Birkhoff normal form, the canonical
//!   chain and the assembled time-dependent model.
//! * [`dynamics`]: streamline integration and stability probing.
//! * [`config`]: JSON run configuration.

// `!(x > 0.0)` is used throughout so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bathymetry;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod hierarchy;
pub mod mode_ode;
pub mod model;
pub mod sampled;

pub use error::{Error, Result};
pub use num_complex::Complex64;

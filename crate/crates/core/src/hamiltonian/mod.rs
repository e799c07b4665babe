//! Canonical reduction of the streamline dynamics near the elliptic point.

pub mod birkhoff;
pub mod chain;
pub mod model;
pub mod poly2;

pub use birkhoff::NormalForm;
pub use chain::{
    equilibria, from_action_angle, normal_form_chain, symplectic_check, to_action_angle,
    CanonicalChain, Equilibrium, EquilibriumKind, FrozenHamiltonian, SymplecticReport,
};
pub use model::{assemble_model, HamiltonianModel, NfReport};
pub use poly2::{CPoly, Poly2};

//! Singlet and triplet excited states of small active-space Hamiltonians
//! with variational quantum algorithms.
//!
//! The pipeline maps FCIDUMP integrals to a reduced qubit Hamiltonian
//! ([`chem`]), finds the ground state with a Ry ansatz ([`vqe`]), then the
//! first triplet and singlet excitations by qEOM or VQD ([`excited`]). Noisy
//! devices are emulated ([`sim`]) and mitigated by readout correction and
//! tomography purification ([`mitigate`]); [`oracle`] supplies exact answers.

pub mod ansatz;
pub mod chem;
pub mod error;
pub mod excited;
pub mod experiment;
pub mod mitigate;
pub mod opt;
pub mod oracle;
pub mod pauli;
pub mod protocol;
pub mod sim;
pub mod systems;
pub mod vqe;

pub use error::{Error, Result};

/// Hartree to electronvolt.
pub const HARTREE_TO_EV: f64 = 27.211386245988;
/// Chemical accuracy in Hartree.
pub const CHEMICAL_ACCURACY: f64 = 1.6e-3;

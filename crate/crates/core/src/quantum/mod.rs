//! Exact diagonalization at fixed boson number.

pub mod bases;
pub mod cache;
pub mod eev;
pub mod eigen;
pub mod fock;
pub mod hamiltonian;

pub use bases::{coefficients_in_basis, make_basis, BasisKind, BasisSet};
pub use cache::SpectrumCache;
pub use eev::eev_hopping;
pub use eigen::{diagonalize, spectrum, symmetric_eigen, SpectrumBundle};
pub use fock::FockBasis;
pub use hamiltonian::{build_hamiltonian, SparseSym};

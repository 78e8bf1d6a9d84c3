//! Chaos indicators for the open Bose-Hubbard chain, classical and quantum.
//!
//! The classical side integrates the discrete nonlinear Schrödinger equation
//! and estimates largest finite-time Lyapunov exponents in energy windows. The
//! quantum side diagonalizes the fixed-N Hamiltonian and measures level-ratio
//! statistics, eigenvector kurtosis and eigenstate expectation-value scaling.
//! [`sweep`] runs both over `(lambda, energy)` grids and writes heatmap tables.

pub mod classical;
pub mod error;
pub mod lattice;
pub mod metrics;
pub mod quantum;
pub mod sweep;

pub use error::{Error, Result};
pub use lattice::{ChainParams, EnergyWindow, WindowGrid};

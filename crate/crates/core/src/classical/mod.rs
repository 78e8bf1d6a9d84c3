//! Classical limit: DNLS dynamics, tangent flow, sampling and FTLEs.

pub mod bounds;
pub mod dnls;
pub mod ftle;
pub mod integrator;
pub mod sampling;

pub use bounds::{classical_energy_bounds, BoundsOptions, EnergyBounds};
pub use dnls::{classical_energy, dnls_rhs, variational_rhs, ClassicalState};
pub use ftle::{ftle_from_deviation, ftle_max, DeviationInit, FtleOptions, FtleRecord, RenormPolicy};
pub use integrator::{IntegrateError, ToleranceSpec};
pub use sampling::{sample_in_window, sample_uniform_sphere, sample_uniform_sphere_seeded};

use crate::error::Result;
use crate::lattice::ChainParams;

/// Advances `state` by time `t` under the DNLS flow.
pub fn integrate(state: &ClassicalState, params: &ChainParams, t: f64, tol: ToleranceSpec) -> Result<ClassicalState> {
    let mut y = state.coords.clone();
    integrator::integrate_field(&dnls::DnlsField { params }, &mut y, t, tol)?;
    Ok(ClassicalState { coords: y })
}

//! Uniform sampling on the norm sphere and energy-window rejection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::dnls::{classical_energy, ClassicalState};
use crate::error::{Error, Result};
use crate::lattice::{ChainParams, EnergyWindow};

/// The generator used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `2 * sites` standard Gaussians and normalizes, i.e. a uniform point on
/// `S^{2L-1}`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(sites: usize, rng: &mut R) -> ClassicalState {
    assert!(sites >= 2);
    loop {
        let coords: Vec<f64> = (0..2 * sites).map(|_| rng.sample(StandardNormal)).collect();
        let norm_sq: f64 = coords.iter().map(|c| c * c).sum();
        if norm_sq > 0.0 {
            return ClassicalState::new(coords).normalized();
        }
    }
}

pub fn sample_uniform_sphere_seeded(sites: usize, seed: u64) -> ClassicalState {
    sample_uniform_sphere(sites, &mut seeded_rng(seed))
}

/// An accepted rejection sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub state: ClassicalState,
    pub energy: f64,
    pub attempts: u64,
}

/// Draws uniform sphere points until one has its energy inside `window`.
pub fn sample_in_window<R: Rng + ?Sized>(
    params: &ChainParams,
    window: &EnergyWindow,
    max_attempts: u64,
    rng: &mut R,
) -> Result<WindowSample> {
    for attempt in 1..=max_attempts {
        let state = sample_uniform_sphere(params.sites(), rng);
        let energy = classical_energy(&state.coords, params);
        if window.contains(energy) {
            return Ok(WindowSample {
                state,
                energy,
                attempts: attempt,
            });
        }
    }
    Err(Error::Exhausted { attempts: max_attempts })
}

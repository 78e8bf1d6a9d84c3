//! Largest finite-time Lyapunov exponent by Benettin renormalization.

use serde::{Deserialize, Serialize};

use super::dnls::{classical_energy, energy_gradient, ClassicalState, TangentField};
use super::integrator::{advance_offset, Dop853, ToleranceSpec};
use super::sampling::{sample_uniform_sphere, seeded_rng};
use crate::lattice::ChainParams;

pub const DEFAULT_CUTOFF: f64 = 1e-4;

/// When the deviation vector is rescaled to unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormPolicy {
    /// Fixed renormalization cadence in time units.
    pub interval: f64,
    /// Renormalize immediately if the norm drops below this ...
    pub min_norm: f64,
    /// ... or rises above this.
    pub max_norm: f64,
}

impl Default for RenormPolicy {
    fn default() -> Self {
        Self {
            interval: 1.0,
            min_norm: 1e-6,
            max_norm: 1e6,
        }
    }
}

/// How the initial deviation direction is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationInit {
    /// Uniform random unit vector in all `2L` directions.
    Random,
    /// Random unit vector orthogonal to the norm and energy gradients, so the
    /// perturbed point stays on the same norm and energy shell to first order.
    #[default]
    ShellTangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtleOptions {
    pub t_total: f64,
    pub renorm: RenormPolicy,
    pub tol: ToleranceSpec,
    pub cutoff: f64,
    pub deviation: DeviationInit,
}

impl Default for FtleOptions {
    fn default() -> Self {
        Self {
            t_total: 1e5,
            renorm: RenormPolicy::default(),
            tol: ToleranceSpec::default(),
            cutoff: DEFAULT_CUTOFF,
            deviation: DeviationInit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtleRecord {
    pub initial: ClassicalState,
    pub energy: f64,
    pub t_total: f64,
    pub lyapunov: f64,
    pub positive: bool,
    /// False when the integration failed before `t_total`.
    pub valid: bool,
    pub t_reached: f64,
    pub renormalizations: u64,
}

impl FtleRecord {
    /// Positivity under a different cutoff than the one the record was made with.
    pub fn positive_at(&self, cutoff: f64) -> bool {
        self.lyapunov > cutoff
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|c| *c /= n);
    n
}

/// Initial unit deviation for `state`, drawn from `seed`.
pub fn initial_deviation(state: &ClassicalState, params: &ChainParams, init: DeviationInit, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    loop {
        let mut dev = sample_uniform_sphere(state.sites(), &mut rng).coords;
        if init == DeviationInit::ShellTangent {
            // Orthonormal basis of {grad N, grad H}; grad N is parallel to the state.
            let mut u1 = state.coords.clone();
            normalize(&mut u1);
            let mut u2 = vec![0.0; u1.len()];
            energy_gradient(&state.coords, params, &mut u2);
            let d = dot(&u2, &u1);
            u2.iter_mut().zip(&u1).for_each(|(g, u)| *g -= d * u);
            let g_norm = dot(&u2, &u2).sqrt();
            for basis in [
                Some(&u1),
                (g_norm > 1e-12).then(|| {
                    u2.iter_mut().for_each(|g| *g /= g_norm);
                    &u2
                }),
            ]
            .into_iter()
            .flatten()
            {
                let d = dot(&dev, basis);
                dev.iter_mut().zip(basis).for_each(|(v, b)| *v -= d * b);
            }
        }
        if dot(&dev, &dev) > 1e-20 {
            normalize(&mut dev);
            return dev;
        }
    }
}

/// Estimates the largest Lyapunov exponent of the trajectory through `state0`.
pub fn ftle_max(state0: &ClassicalState, params: &ChainParams, opts: &FtleOptions, seed: u64) -> FtleRecord {
    let dev0 = initial_deviation(state0, params, opts.deviation, seed);
    ftle_from_deviation(state0, &dev0, params, opts)
}

/// As [`ftle_max`] with an explicit initial deviation (normalized internally).
pub fn ftle_from_deviation(
    state0: &ClassicalState,
    dev0: &[f64],
    params: &ChainParams,
    opts: &FtleOptions,
) -> FtleRecord {
    let half = state0.coords.len();
    assert_eq!(dev0.len(), half);
    let field = TangentField { params };
    let mut y = Vec::with_capacity(2 * half);
    y.extend_from_slice(&state0.coords);
    y.extend_from_slice(dev0);
    normalize(&mut y[half..]);

    let mut stepper = Dop853::new(2 * half, opts.tol);
    let mut log_sum = 0.0;
    let mut renorms = 0u64;
    let mut t = 0.0;
    let policy = opts.renorm;
    let mut failure = None;
    while t < opts.t_total {
        let seg = policy.interval.min(opts.t_total - t);
        let result = advance_offset(&mut stepper, &field, &mut y, seg, t, |y| {
            let dev = &mut y[half..];
            let n = dot(dev, dev).sqrt();
            if n < policy.min_norm || n > policy.max_norm {
                log_sum += n.ln();
                renorms += 1;
                dev.iter_mut().for_each(|c| *c /= n);
                true
            } else {
                false
            }
        });
        if let Err(e) = result {
            failure = Some(e);
            break;
        }
        t = if opts.t_total - t <= seg { opts.t_total } else { t + seg };
        if t < opts.t_total {
            log_sum += normalize(&mut y[half..]).ln();
            renorms += 1;
            stepper.invalidate();
        }
    }

    let energy = classical_energy(&state0.coords, params);
    match failure {
        None => {
            let dev_norm = dot(&y[half..], &y[half..]).sqrt();
            let lyapunov = (log_sum + dev_norm.ln()) / opts.t_total;
            FtleRecord {
                initial: state0.clone(),
                energy,
                t_total: opts.t_total,
                lyapunov,
                positive: lyapunov > opts.cutoff,
                valid: true,
                t_reached: opts.t_total,
                renormalizations: renorms,
            }
        }
        Some(e) => {
            let t_reached = e.t_reached();
            let lyapunov = if t_reached > 0.0 { log_sum / t_reached } else { 0.0 };
            FtleRecord {
                initial: state0.clone(),
                energy,
                t_total: opts.t_total,
                lyapunov,
                positive: false,
                valid: false,
                t_reached,
                renormalizations: renorms,
            }
        }
    }
}

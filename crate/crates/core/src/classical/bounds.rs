//! Extremal classical energies on the unit norm sphere.
//!
//! Multi-start projected gradient descent with a backtracking line search. The
//! maximum is found by descending `-H`.

use log::warn;
use serde::{Deserialize, Serialize};

use super::dnls::{classical_energy, energy_gradient};
use super::sampling::{sample_uniform_sphere, seeded_rng};
use crate::lattice::ChainParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the norm of the projected gradient.
    pub grad_tol: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            restarts: 100,
            max_iter: 20_000,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBounds {
    pub e_min: f64,
    pub e_max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    /// False when the best minimum or maximum stopped on the iteration cap.
    pub converged: bool,
}

struct Extremum {
    value: f64,
    point: Vec<f64>,
    converged: bool,
}

fn project_out(v: &mut [f64], unit: &[f64]) {
    let d: f64 = v.iter().zip(unit).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(unit).for_each(|(a, b)| *a -= d * b);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Projected (tangent) gradient of `sign * H` at `psi`; returns its norm.
fn tangent_gradient(params: &ChainParams, psi: &[f64], sign: f64, grad: &mut [f64]) -> f64 {
    energy_gradient(psi, params, grad);
    grad.iter_mut().for_each(|g| *g *= sign);
    project_out(grad, psi);
    norm(grad)
}

/// Minimizes `sign * H` on the sphere from `start`.
fn descend(params: &ChainParams, start: Vec<f64>, sign: f64, opts: &BoundsOptions) -> Extremum {
    let dim = start.len();
    let f = |p: &[f64]| sign * classical_energy(p, params);
    let mut psi = start;
    let mut value = f(&psi);
    let mut grad = vec![0.0; dim];
    let mut cand = vec![0.0; dim];
    let mut cand_grad = vec![0.0; dim];
    let mut alpha: f64 = 0.5;
    let mut gnorm = tangent_gradient(params, &psi, sign, &mut grad);
    for _ in 0..opts.max_iter {
        if gnorm < opts.grad_tol {
            return Extremum {
                value,
                point: psi,
                converged: true,
            };
        }
        alpha = (alpha * 2.0).min(10.0);
        let resolution = 16.0 * f64::EPSILON * value.abs().max(1.0);
        loop {
            for i in 0..dim {
                cand[i] = psi[i] - alpha * grad[i];
            }
            let n = norm(&cand);
            cand.iter_mut().for_each(|c| *c /= n);
            let fc = f(&cand);
            let decrease = 1e-4 * alpha * gnorm * gnorm;
            // Once the Armijo decrease is below the rounding of `value`, judge the
            // step by the tangent gradient instead.
            let accept = if decrease > resolution {
                fc <= value - decrease
            } else {
                fc <= value + resolution && tangent_gradient(params, &cand, sign, &mut cand_grad) < gnorm
            };
            if accept {
                std::mem::swap(&mut psi, &mut cand);
                value = fc;
                gnorm = tangent_gradient(params, &psi, sign, &mut grad);
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-18 {
                return Extremum {
                    value,
                    point: psi,
                    converged: false,
                };
            }
        }
    }
    Extremum {
        value,
        converged: gnorm < opts.grad_tol,
        point: psi,
    }
}

/// Lowest and highest classical energy, by `restarts` random starts each.
pub fn classical_energy_bounds(params: &ChainParams, opts: &BoundsOptions, seed: u64) -> EnergyBounds {
    let mut rng = seeded_rng(seed);
    let mut best_min: Option<Extremum> = None;
    let mut best_max: Option<Extremum> = None;
    for _ in 0..opts.restarts.max(1) {
        let start = sample_uniform_sphere(params.sites(), &mut rng).coords;
        let lo = descend(params, start.clone(), 1.0, opts);
        let hi = descend(params, start, -1.0, opts);
        if best_min.as_ref().is_none_or(|b| lo.value < b.value) {
            best_min = Some(lo);
        }
        if best_max.as_ref().is_none_or(|b| hi.value < b.value) {
            best_max = Some(hi);
        }
    }
    let (lo, hi) = (best_min.unwrap(), best_max.unwrap());
    let converged = lo.converged && hi.converged;
    if !converged {
        warn!(
            "energy bounds at lambda={} hit the iteration cap before convergence",
            params.lambda()
        );
    }
    EnergyBounds {
        e_min: lo.value,
        e_max: -hi.value,
        argmin: lo.point,
        argmax: hi.point,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::sampling::sample_uniform_sphere;

    /// Extreme eigenvalues of the one-particle matrix with off-diagonals `-J/2`,
    /// from the characteristic polynomial of the 3x3 tridiagonal case.
    fn one_particle_extremes(j12: f64, j23: f64) -> f64 {
        ((j12 / 2.0).powi(2) + (j23 / 2.0).powi(2)).sqrt()
    }

    #[test]
    fn free_chain_bounds_are_one_particle_extremes() {
        let p = ChainParams::three_site(0.0, 1).unwrap();
        let b = classical_energy_bounds(&p, &BoundsOptions::default(), 1);
        let mu = one_particle_extremes(1.5, 1.0);
        assert!((mu - 0.901_387_818_865_997).abs() < 1e-12);
        assert!((b.e_min + mu).abs() < 1e-10, "{}", b.e_min);
        assert!((b.e_max - mu).abs() < 1e-10, "{}", b.e_max);
        assert!(b.converged);
    }

    #[test]
    fn strong_interaction_maximum_is_self_trapped() {
        let p = ChainParams::three_site(100.0, 1).unwrap();
        let b = classical_energy_bounds(&p, &BoundsOptions::default(), 1);
        let trapped = classical_energy(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &p);
        assert_eq!(trapped, 50.0);
        assert!(b.e_max >= trapped);
        assert!((b.e_max - 50.0).abs() < 0.5);
    }

    #[test]
    fn bounds_enclose_random_samples() {
        for &lambda in &[0.0, 0.28, 2.48, 12.33] {
            let p = ChainParams::three_site(lambda, 1).unwrap();
            let b = classical_energy_bounds(&p, &BoundsOptions::default(), 9);
            let mut rng = seeded_rng(17);
            for _ in 0..10_000 {
                let s = sample_uniform_sphere(3, &mut rng);
                let e = classical_energy(&s.coords, &p);
                assert!(e >= b.e_min - 1e-12 && e <= b.e_max + 1e-12);
            }
        }
    }
}

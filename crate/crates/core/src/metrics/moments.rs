//! Excess kurtosis of eigenvector coefficients and eigenstate expectation-value widths.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::EnergyWindow;

/// Population central moments `(mean, m2, m4)`.
fn central_moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64, usize) {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    let mean = sum / n.max(1) as f64;
    let (m2, m4) = values.fold((0.0, 0.0), |(a, b), x| {
        let d = (x - mean) * (x - mean);
        (a + d, b + d * d)
    });
    (mean, m2 / n.max(1) as f64, m4 / n.max(1) as f64, n)
}

/// `m4 / m2^2 - 3`; `None` for fewer than four values or zero variance.
pub fn excess_kurtosis(values: &[f64]) -> Option<f64> {
    kurtosis_of(values.iter().copied())
}

fn kurtosis_of(values: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let (_, m2, m4, n) = central_moments(values);
    (n >= 4 && m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0)
}

/// How eigenstates in a window are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KurtosisPooling {
    /// Kurtosis of each eigenstate, then the mean over the window.
    #[default]
    PerState,
    /// One kurtosis over all coefficients of all eigenstates in the window.
    Pooled,
}

/// Eigenstates (columns) whose eigenvalue falls in `window`.
pub fn states_in_window(eigenvalues: &[f64], window: &EnergyWindow) -> Vec<usize> {
    (0..eigenvalues.len())
        .filter(|&k| window.contains(eigenvalues[k]))
        .collect()
}

/// Window-averaged kurtosis of the coefficient columns, with the number of states used.
pub fn window_kurtosis(
    coefficients: &Mat<f64>,
    eigenvalues: &[f64],
    window: &EnergyWindow,
    pooling: KurtosisPooling,
) -> (Option<f64>, usize) {
    let states = states_in_window(eigenvalues, window);
    (kurtosis_over_states(coefficients, &states, pooling), states.len())
}

pub fn kurtosis_over_states(coefficients: &Mat<f64>, states: &[usize], pooling: KurtosisPooling) -> Option<f64> {
    if states.is_empty() {
        return None;
    }
    match pooling {
        KurtosisPooling::PerState => {
            let per: Vec<f64> = states
                .iter()
                .filter_map(|&k| excess_kurtosis(coefficients.col_as_slice(k)))
                .collect();
            (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
        }
        KurtosisPooling::Pooled => kurtosis_of(
            states
                .iter()
                .flat_map(|&k| coefficients.col_as_slice(k).iter().copied()),
        ),
    }
}

/// Population standard deviation; `None` for fewer than two values.
pub fn population_std(values: &[f64]) -> Option<f64> {
    let (_, m2, _, n) = central_moments(values.iter().copied());
    (n >= 2).then(|| m2.sqrt())
}

/// Spread of the EEVs of eigenstates in `window`, with the number of states used.
pub fn eev_sigma(eevs: &[f64], eigenvalues: &[f64], window: &EnergyWindow) -> (Option<f64>, usize) {
    let inside: Vec<f64> = states_in_window(eigenvalues, window)
        .into_iter()
        .map(|k| eevs[k])
        .collect();
    (population_std(&inside), inside.len())
}

/// Display range of the scaling exponent.
pub const EXPONENT_CLIP: (f64, f64) = (0.0, 0.3);

/// Least-squares slope of `-ln sigma` against `ln D`.
///
/// Points with non-positive or non-finite `sigma` are dropped; fewer than three survivors
/// gives `None`. Repeated dimensions are an error.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<Option<f64>> {
    let mut dims: Vec<f64> = points.iter().map(|p| p.0).collect();
    dims.sort_by(f64::total_cmp);
    if dims.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParams("scaling fit needs distinct dimensions".into()));
    }
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(d, s)| d > 0.0 && s > 0.0 && s.is_finite())
        .map(|&(d, s)| (d.ln(), -s.ln()))
        .collect();
    if kept.len() < 3 {
        return Ok(None);
    }
    let n = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(Some(sxy / sxx))
}

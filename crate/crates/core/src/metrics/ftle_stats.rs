//! Window aggregates of largest-Lyapunov-exponent estimates.

use serde::{Deserialize, Serialize};

use crate::classical::FtleRecord;

/// Smallest denominator for the max-rescaled mean, equal to the positivity cutoff.
pub const GAMMA_FLOOR: f64 = 1e-4;

fn valid(records: &[FtleRecord]) -> impl Iterator<Item = f64> + '_ {
    records.iter().filter(|r| r.valid).map(|r| r.lyapunov)
}

/// Share of valid records above `cutoff`; `None` when there are none.
pub fn positive_fraction(records: &[FtleRecord], cutoff: f64) -> Option<f64> {
    let (pos, n) = valid(records).fold((0usize, 0usize), |(p, n), l| (p + usize::from(l > cutoff), n + 1));
    (n > 0).then(|| pos as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rescale {
    /// Divide by `max(1.5, lambda)`.
    Beta,
    /// Divide by `max(1e-4, largest exponent at this lambda)`.
    Gamma,
}

pub fn beta(lambda: f64) -> f64 {
    lambda.max(1.5)
}

pub fn gamma(global_max: f64) -> f64 {
    global_max.max(GAMMA_FLOOR)
}

/// Largest valid exponent across every window of one lambda column.
pub fn column_max<'a>(windows: impl IntoIterator<Item = &'a [FtleRecord]>) -> Option<f64> {
    windows
        .into_iter()
        .flat_map(|w| valid(w))
        .fold(None, |m: Option<f64>, l| Some(m.map_or(l, |m| m.max(l))))
}

/// Mean exponent of the valid records divided by the chosen scale.
pub fn rescaled_mean_ftle(records: &[FtleRecord], mode: Rescale, lambda: f64, global_max: f64) -> Option<f64> {
    let (sum, n) = valid(records).fold((0.0, 0usize), |(s, n), l| (s + l, n + 1));
    if n == 0 {
        return None;
    }
    let scale = match mode {
        Rescale::Beta => beta(lambda),
        Rescale::Gamma => gamma(global_max),
    };
    Some(sum / n as f64 / scale)
}

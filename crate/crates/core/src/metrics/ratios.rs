//! Consecutive level-spacing ratios and their distance to the GOE and Poisson laws.

use serde::{Deserialize, Serialize};

/// Spacings below this fraction of the spectral width count as degeneracies.
pub const DEGENERACY_TOL: f64 = 1e-12;

pub const GOE_MEAN_RATIO: f64 = 0.535_898_384_862_245_4; // 4 - 2 sqrt 3
pub const POISSON_MEAN_RATIO: f64 = 0.386_294_361_119_890_6; // 2 ln 2 - 1

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    /// Each `min(r, 1/r)` of neighbouring spacings, in `[0, 1]`.
    pub values: Vec<f64>,
    /// Ratios skipped because a spacing was degenerate.
    pub dropped: usize,
    /// Fewer than three levels were supplied.
    pub too_few_levels: bool,
}

impl RatioSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.values.iter().sum::<f64>() / self.values.len() as f64)
    }
}

/// Ratios of an ascending level sequence, with the degeneracy scale taken from its own width.
pub fn spacing_ratios(levels: &[f64]) -> RatioSample {
    let width = match (levels.first(), levels.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    spacing_ratios_with_width(levels, width)
}

/// As [`spacing_ratios`] with the degeneracy scale set by `spectral_width`, normally the
/// width of the whole spectrum the window was cut from.
pub fn spacing_ratios_with_width(levels: &[f64], spectral_width: f64) -> RatioSample {
    if levels.len() < 3 {
        return RatioSample {
            too_few_levels: true,
            ..RatioSample::default()
        };
    }
    let floor = DEGENERACY_TOL * spectral_width.abs();
    let mut sample = RatioSample::default();
    for w in levels.windows(3) {
        let (s0, s1) = (w[1] - w[0], w[2] - w[1]);
        if s0 <= floor || s1 <= floor {
            sample.dropped += 1;
            continue;
        }
        let r = s1 / s0;
        sample.values.push(r.min(1.0 / r));
    }
    sample
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Goe,
    Poisson,
}

impl Reference {
    pub fn mean(self) -> f64 {
        match self {
            Reference::Goe => GOE_MEAN_RATIO,
            Reference::Poisson => POISSON_MEAN_RATIO,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Reference::Goe => "goe",
            Reference::Poisson => "poi",
        }
    }
}

/// Density of the folded ratio on `[0, 1]`, zero outside.
pub fn reference_pdf(kind: Reference, r: f64) -> f64 {
    if !(0.0..=1.0).contains(&r) {
        return 0.0;
    }
    match kind {
        // 2/Z with Z = 8/27
        Reference::Goe => 6.75 * (r + r * r) / (1.0 + r + r * r).powf(2.5),
        Reference::Poisson => 2.0 / ((1.0 + r) * (1.0 + r)),
    }
}

/// 20-point Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration.
fn gauss_legendre_20() -> &'static [(f64, f64); 20] {
    use std::sync::OnceLock;
    static RULE: OnceLock<[(f64, f64); 20]> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 20;
        let mut rule = [(0.0, 0.0); N];
        for (i, slot) in rule.iter_mut().enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

/// Integral of `f` over `[a, b]` by Gauss-Legendre on `panels` equal sub-intervals.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            gauss_legendre_20()
                .iter()
                .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Probability mass of each of `bins` equal-width bins on `[0, 1]`.
pub fn reference_bin_masses(kind: Reference, bins: usize) -> Vec<f64> {
    (0..bins)
        .map(|i| {
            let a = i as f64 / bins as f64;
            let b = (i + 1) as f64 / bins as f64;
            integrate(|r| reference_pdf(kind, r), a, b, 4)
        })
        .collect()
}

/// Normalized counts of `sample` in `bins` equal bins on `[0, 1]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &v in values {
        let i = ((v * bins as f64) as usize).min(bins - 1);
        counts[i] += 1.0;
    }
    let n = values.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

/// Discrete relative entropy `sum P ln(P/Q)`; empty bins of `p` contribute nothing.
pub fn kl_from_masses(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// KL divergence of the binned sample from the reference law; `None` for an empty sample.
pub fn kl_divergence(sample: &RatioSample, kind: Reference, bins: usize) -> Option<f64> {
    if sample.is_empty() || bins < 2 {
        return None;
    }
    let p = histogram(&sample.values, bins);
    Some(kl_from_masses(&p, &reference_bin_masses(kind, bins)))
}

/// `|mean - m_kind|`; `None` for an empty sample.
pub fn mean_ratio_distance(sample: &RatioSample, kind: Reference) -> Option<f64> {
    sample.mean().map(|m| (m - kind.mean()).abs())
}

//! Open-boundary Bose-Hubbard chain parameters and energy windows.
//!
//! The interaction is always carried as `lambda = U * N`, so the classical
//! side (which never sees `N`) and the quantum side (which derives
//! `U = lambda / N`) share one parameterization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupling of the first bond in the default chain; breaks reflection symmetry.
pub const DEFAULT_FIRST_COUPLING: f64 = 1.5;
pub const DEFAULT_SITES: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 2.48;
pub const DEFAULT_BOSONS: u32 = 150;
pub const DEFAULT_WINDOW_COUNT: usize = 100;

/// Default couplings for an `sites`-site chain: `J_12 = 1.5`, every other bond `1`.
pub fn default_couplings(sites: usize) -> Vec<f64> {
    (0..sites.saturating_sub(1))
        .map(|bond| if bond == 0 { DEFAULT_FIRST_COUPLING } else { 1.0 })
        .collect()
}

/// Validated chain parameters.
///
/// `couplings[j]` is the hopping amplitude on the bond between sites `j` and `j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainConfig", into = "ChainConfig")]
pub struct ChainParams {
    sites: usize,
    couplings: Vec<f64>,
    lambda: f64,
    bosons: u32,
}

impl ChainParams {
    /// Builds a chain, applying the default couplings when `couplings` is `None`.
    pub fn new(sites: usize, couplings: Option<Vec<f64>>, lambda: f64, bosons: u32) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 sites, got {sites}")));
        }
        let couplings = couplings.unwrap_or_else(|| default_couplings(sites));
        if couplings.len() != sites - 1 {
            return Err(Error::InvalidParams(format!(
                "couplings length must be L-1={}, got {}",
                sites - 1,
                couplings.len()
            )));
        }
        if let Some(j) = couplings.iter().find(|j| !j.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite coupling {j}")));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParams(format!(
                "interaction must be finite and non-negative, got {lambda}"
            )));
        }
        if bosons < 1 {
            return Err(Error::InvalidParams("boson number must be at least 1".into()));
        }
        Ok(Self {
            sites,
            couplings,
            lambda,
            bosons,
        })
    }

    /// The default three-site chain at the given interaction and boson number.
    pub fn three_site(lambda: f64, bosons: u32) -> Result<Self> {
        Self::new(DEFAULT_SITES, None, lambda, bosons)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bosons(&self) -> u32 {
        self.bosons
    }

    /// On-site interaction `U = lambda / N` of the quantum model.
    pub fn onsite_u(&self) -> f64 {
        self.lambda / f64::from(self.bosons)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.sites, Some(self.couplings.clone()), lambda, self.bosons)
    }

    pub fn with_bosons(&self, bosons: u32) -> Result<Self> {
        Self::new(self.sites, Some(self.couplings.clone()), self.lambda, bosons)
    }

    /// Iterator over `(j, j + 1, J)` for every bond.
    pub fn bonds(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.couplings.iter().enumerate().map(|(j, &c)| (j, j + 1, c))
    }
}

/// JSON form of [`ChainParams`]; absent keys fall back to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    #[serde(rename = "L", default = "default_sites")]
    pub sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(rename = "N", default = "default_bosons")]
    pub bosons: u32,
}

fn default_sites() -> usize {
    DEFAULT_SITES
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_bosons() -> u32 {
    DEFAULT_BOSONS
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sites: DEFAULT_SITES,
            couplings: None,
            lambda: DEFAULT_LAMBDA,
            bosons: DEFAULT_BOSONS,
        }
    }
}

impl TryFrom<ChainConfig> for ChainParams {
    type Error = Error;

    fn try_from(c: ChainConfig) -> Result<Self> {
        ChainParams::new(c.sites, c.couplings, c.lambda, c.bosons)
    }
}

impl From<ChainParams> for ChainConfig {
    fn from(p: ChainParams) -> Self {
        ChainConfig {
            sites: p.sites,
            couplings: Some(p.couplings),
            lambda: p.lambda,
            bosons: p.bosons,
        }
    }
}

/// Maps an energy into `[0, 1]` relative to `[e_min, e_max]`.
pub fn relative_energy(e: f64, e_min: f64, e_max: f64) -> Result<f64> {
    if !(e_max > e_min) {
        return Err(Error::DegenerateRange { min: e_min, max: e_max });
    }
    Ok((e - e_min) / (e_max - e_min))
}

/// One of the equal-width energy intervals.
///
/// Membership is `lo < E <= hi`, except that window 0 also contains `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    /// Upper edge in relative energy.
    pub e_rel_hi: f64,
}

impl EnergyWindow {
    pub fn contains(&self, e: f64) -> bool {
        (e > self.lo || (self.index == 0 && e == self.lo)) && e <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A full partition of `[e_min, e_max]` into equal-width windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub e_min: f64,
    pub e_max: f64,
    pub windows: Vec<EnergyWindow>,
}

impl WindowGrid {
    pub fn new(e_min: f64, e_max: f64, count: usize) -> Result<Self> {
        Ok(Self {
            e_min,
            e_max,
            windows: make_windows(e_min, e_max, count)?,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Index of the window holding `e`, or `None` outside `[e_min, e_max]`.
    pub fn locate(&self, e: f64) -> Option<usize> {
        if !(e >= self.e_min && e <= self.e_max) {
            return None;
        }
        let n = self.windows.len();
        let guess = ((e - self.e_min) / (self.e_max - self.e_min) * n as f64).ceil() as isize - 1;
        let guess = guess.clamp(0, n as isize - 1) as usize;
        // Rounding in the guess can be off by one near an edge.
        [guess, guess.saturating_sub(1), (guess + 1).min(n - 1)]
            .into_iter()
            .find(|&i| self.windows[i].contains(e))
    }

    /// Window indices whose upper relative edge lies in `[lo, hi]` (inclusive, with
    /// a small tolerance for the decimal edges).
    pub fn indices_with_upper_edge_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        const EPS: f64 = 1e-9;
        self.windows
            .iter()
            .filter(|w| w.e_rel_hi > lo + EPS && w.e_rel_hi <= hi + EPS)
            .map(|w| w.index)
            .collect()
    }

    /// The window whose relative upper edge is nearest to `e_rel`.
    pub fn nearest_upper_edge(&self, e_rel: f64) -> usize {
        self.windows
            .iter()
            .min_by(|a, b| (a.e_rel_hi - e_rel).abs().total_cmp(&(b.e_rel_hi - e_rel).abs()))
            .map(|w| w.index)
            .unwrap_or(0)
    }
}

/// Partitions `[e_min, e_max]` into `count` contiguous windows of equal width.
pub fn make_windows(e_min: f64, e_max: f64, count: usize) -> Result<Vec<EnergyWindow>> {
    if !(e_max > e_min) || !e_min.is_finite() || !e_max.is_finite() {
        return Err(Error::DegenerateRange { min: e_min, max: e_max });
    }
    if count == 0 {
        return Err(Error::InvalidParams("window count must be at least 1".into()));
    }
    let span = e_max - e_min;
    let edge = |i: usize| {
        if i == count {
            e_max
        } else {
            e_min + span * (i as f64) / (count as f64)
        }
    };
    Ok((0..count)
        .map(|i| EnergyWindow {
            index: i,
            lo: edge(i),
            hi: edge(i + 1),
            e_rel_hi: (i + 1) as f64 / count as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain_uses_asymmetric_first_bond() {
        let p = ChainParams::new(3, None, 2.48, 150).unwrap();
        assert_eq!(p.couplings(), &[1.5, 1.0]);
        assert!((p.onsite_u() - 2.48 / 150.0).abs() < 1e-15);
    }

    #[test]
    fn longer_default_chain_keeps_unit_couplings_after_first_bond() {
        let p = ChainParams::new(7, None, 1.52, 10).unwrap();
        assert_eq!(p.couplings(), &[1.5, 1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_site_chain_is_valid() {
        let p = ChainParams::new(2, Some(vec![1.0]), 5.0, 10).unwrap();
        assert_eq!(p.sites(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ChainParams::new(3, Some(vec![1.5]), 1.0, 10),
            Err(Error::InvalidParams(_))
        ));
        assert!(ChainParams::new(1, None, 1.0, 10).is_err());
        assert!(ChainParams::new(3, None, -0.1, 10).is_err());
        assert!(ChainParams::new(3, None, 1.0, 0).is_err());
        assert!(ChainParams::new(3, Some(vec![1.0, f64::NAN]), 1.0, 1).is_err());
    }

    #[test]
    fn json_defaults_fill_missing_keys() {
        let p: ChainParams = serde_json::from_str(r#"{"lambda": 0.28}"#).unwrap();
        assert_eq!(p.sites(), 3);
        assert_eq!(p.couplings(), &[1.5, 1.0]);
        assert_eq!(p.bosons(), DEFAULT_BOSONS);
        assert_eq!(p.lambda(), 0.28);

        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"L\":3"));
        assert!(text.contains("\"N\":150"));
        let back: ChainParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        let bad: std::result::Result<ChainParams, _> = serde_json::from_str(r#"{"L": 4, "couplings": [1.0]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn relative_energy_is_affine() {
        assert_eq!(relative_energy(-1.0, -1.0, 3.0).unwrap(), 0.0);
        assert_eq!(relative_energy(3.0, -1.0, 3.0).unwrap(), 1.0);
        assert_eq!(relative_energy(0.0, -1.0, 3.0).unwrap(), 0.25);
        assert!(relative_energy(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn unit_range_hundred_windows() {
        let w = make_windows(0.0, 1.0, 100).unwrap();
        assert_eq!(w.len(), 100);
        assert!((w[39].lo - 0.39).abs() < 1e-15);
        assert!((w[39].hi - 0.40).abs() < 1e-15);
        assert_eq!(w[39].e_rel_hi, 0.40);
        assert_eq!(w[99].hi, 1.0);
    }

    #[test]
    fn four_windows_on_symmetric_range() {
        let w = make_windows(-2.0, 2.0, 4).unwrap();
        let edges: Vec<(f64, f64)> = w.iter().map(|w| (w.lo, w.hi)).collect();
        assert_eq!(edges, vec![(-2.0, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, 2.0)]);
    }

    #[test]
    fn single_window_and_degenerate_range() {
        let w = make_windows(0.0, 1.0, 1).unwrap();
        assert_eq!((w[0].lo, w[0].hi), (0.0, 1.0));
        assert!(make_windows(1.0, 1.0, 10).is_err());
        assert!(make_windows(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn edges_belong_to_exactly_one_window() {
        let grid = WindowGrid::new(-2.0, 2.0, 4).unwrap();
        assert_eq!(grid.locate(-2.0), Some(0));
        assert_eq!(grid.locate(-1.0), Some(0));
        assert_eq!(grid.locate(-0.999), Some(1));
        assert_eq!(grid.locate(2.0), Some(3));
        assert_eq!(grid.locate(2.0001), None);
        assert_eq!(grid.locate(-2.0001), None);
    }

    #[test]
    fn relative_edge_selection() {
        let grid = WindowGrid::new(0.0, 1.0, 100).unwrap();
        let idx = grid.indices_with_upper_edge_in(0.3, 0.5);
        assert_eq!(idx.first(), Some(&30));
        assert_eq!(idx.last(), Some(&49));
        assert_eq!(grid.nearest_upper_edge(0.4), 39);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn every_energy_in_range_lands_in_one_window(
                lo in -100.0f64..100.0,
                span in 1e-3f64..50.0,
                count in 1usize..200,
                frac in 0.0f64..=1.0,
            ) {
                let grid = WindowGrid::new(lo, lo + span, count).unwrap();
                let e = (lo + frac * span).min(lo + span);
                let hits: Vec<usize> = grid.windows.iter().filter(|w| w.contains(e)).map(|w| w.index).collect();
                prop_assert_eq!(hits.len(), 1);
                prop_assert_eq!(grid.locate(e), Some(hits[0]));
            }

            #[test]
            fn windows_are_contiguous_and_equal_width(
                lo in -100.0f64..100.0,
                span in 1e-3f64..50.0,
                count in 1usize..200,
            ) {
                let w = make_windows(lo, lo + span, count).unwrap();
                let width = span / count as f64;
                let tol = 4.0 * f64::EPSILON * (lo.abs() + span);
                prop_assert_eq!(w[0].lo, lo);
                prop_assert_eq!(w[count - 1].hi, lo + span);
                for pair in w.windows(2) {
                    prop_assert_eq!(pair[0].hi, pair[1].lo);
                }
                for win in &w {
                    prop_assert!((win.width() - width).abs() <= tol);
                }
            }

            #[test]
            fn relative_energy_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
                let ra = relative_energy(a, -10.0, 10.0).unwrap();
                let rb = relative_energy(b, -10.0, 10.0).unwrap();
                prop_assert_eq!(a < b, ra < rb);
            }
        }
    }
}

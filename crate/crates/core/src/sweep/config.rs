//! Serializable sweep configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{BoundsOptions, DeviationInit, FtleOptions, RenormPolicy, ToleranceSpec};
use crate::error::{Error, Result};
use crate::lattice::{ChainConfig, ChainParams, DEFAULT_WINDOW_COUNT};
use crate::metrics::heatmap::{DisplayTransform, KL_CAP, KURTOSIS_CAP};
use crate::metrics::moments::EXPONENT_CLIP;
use crate::metrics::KurtosisPooling;

/// Interaction strengths quoted for the figure panels.
pub const REFERENCE_LAMBDAS: [f64; 5] = [0.28, 0.43, 1.52, 2.48, 12.33];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaPreset {
    /// [`REFERENCE_LAMBDAS`].
    Reference,
}

/// The lambda axis of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaGrid {
    Preset(LambdaPreset),
    /// `count` points log-spaced between `min` and `max`, both included.
    Log {
        min: f64,
        max: f64,
        count: usize,
    },
    Values(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Log {
            min: 0.1,
            max: 100.0,
            count: 40,
        }
    }
}

impl LambdaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            LambdaGrid::Preset(LambdaPreset::Reference) => REFERENCE_LAMBDAS.to_vec(),
            LambdaGrid::Values(v) => v.clone(),
            &LambdaGrid::Log { min, max, count } => {
                if !(min > 0.0 && max > min) || count < 2 {
                    return Err(Error::Config(format!(
                        "log grid needs 0 < min < max and count >= 2, got {min}, {max}, {count}"
                    )));
                }
                let (a, b) = (min.ln(), max.ln());
                (0..count)
                    .map(|i| match i {
                        0 => min,
                        i if i == count - 1 => max,
                        i => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        if let Some(l) = v.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::Config(format!("invalid lambda {l}")));
        }
        Ok(v)
    }
}

/// Display caps applied when heatmaps are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub kl: f64,
    pub kurtosis: f64,
    pub exponent_min: f64,
    pub exponent_max: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            kl: KL_CAP,
            kurtosis: KURTOSIS_CAP,
            exponent_min: EXPONENT_CLIP.0,
            exponent_max: EXPONENT_CLIP.1,
        }
    }
}

impl Caps {
    pub fn kl(&self) -> DisplayTransform {
        DisplayTransform::Cap { max: self.kl }
    }

    pub fn kurtosis(&self) -> DisplayTransform {
        DisplayTransform::Cap { max: self.kurtosis }
    }

    pub fn exponent(&self) -> DisplayTransform {
        DisplayTransform::Clip {
            min: self.exponent_min,
            max: self.exponent_max,
        }
    }
}

/// Everything a sweep needs; a run is a pure function of this value.
///
/// The chain keys (`L`, `couplings`, `lambda`, `N`) sit at the top level. Sweeps
/// take lambda from `lambdas` and N from `n_list`; the single-point commands
/// use `lambda` and `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub chain: ChainConfig,
    pub lambdas: LambdaGrid,
    pub n_list: Vec<u32>,
    /// Boson number of the quantum heatmaps; the largest of `n_list` when absent.
    pub heatmap_n: Option<u32>,
    pub samples_per_window: usize,
    pub t_total: f64,
    pub renorm: RenormPolicy,
    pub tolerance: ToleranceSpec,
    pub cutoff: f64,
    pub deviation: DeviationInit,
    pub bins: usize,
    pub caps: Caps,
    pub kurtosis_pooling: KurtosisPooling,
    pub windows: usize,
    /// Restrict the work to these window indices; the rest stay null.
    pub window_subset: Option<Vec<usize>>,
    pub max_attempts: u64,
    pub bounds: BoundsOptions,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    /// Spectrum cache; `<out>/spectra` when absent.
    pub cache_dir: Option<PathBuf>,
    /// Also cache eigenvectors (D^2 doubles per spectrum).
    pub cache_vectors: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let ftle = FtleOptions::default();
        Self {
            chain: ChainConfig::default(),
            lambdas: LambdaGrid::default(),
            n_list: vec![30, 40, 50, 60, 70],
            heatmap_n: None,
            samples_per_window: 100,
            t_total: ftle.t_total,
            renorm: ftle.renorm,
            tolerance: ftle.tol,
            cutoff: ftle.cutoff,
            deviation: ftle.deviation,
            bins: 20,
            caps: Caps::default(),
            kurtosis_pooling: KurtosisPooling::default(),
            windows: DEFAULT_WINDOW_COUNT,
            window_subset: None,
            max_attempts: 1_000_000,
            bounds: BoundsOptions::default(),
            seed: 0,
            workers: 1,
            out: None,
            cache_dir: None,
            cache_vectors: false,
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl SweepConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.lambdas.values()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.windows == 0 {
            return bad("windows must be at least 1".into());
        }
        if let Some(w) = self.window_subset.iter().flatten().find(|&&w| w >= self.windows) {
            return bad(format!("window {w} out of range 0..{}", self.windows));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return bad(format!("t_total must be positive, got {}", self.t_total));
        }
        if self.bins < 2 {
            return bad("bins must be at least 2".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if self.n_list.iter().any(|&n| n == 0) {
            return bad("boson numbers must be positive".into());
        }
        if let Some(n) = self.heatmap_n {
            if !self.n_list.contains(&n) {
                return bad(format!("heatmap_n {n} is not in n_list"));
            }
        }
        Ok(())
    }

    /// The chain at the top-level `lambda` and `N`.
    pub fn params(&self) -> Result<ChainParams> {
        ChainParams::try_from(self.chain.clone())
    }

    pub fn lambda_values(&self) -> Result<Vec<f64>> {
        self.lambdas.values()
    }

    /// Windows to compute, ascending.
    pub fn active_windows(&self) -> Vec<usize> {
        match &self.window_subset {
            Some(s) => {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                s
            }
            None => (0..self.windows).collect(),
        }
    }

    pub fn ftle_options(&self) -> FtleOptions {
        FtleOptions {
            t_total: self.t_total,
            renorm: self.renorm,
            tol: self.tolerance,
            cutoff: self.cutoff,
            deviation: self.deviation,
        }
    }

    pub fn heatmap_bosons(&self) -> Option<u32> {
        self.heatmap_n.or_else(|| self.n_list.iter().copied().max())
    }

    pub fn cache_path(&self, out: &Path) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| out.join("spectra"))
    }

    /// Digest of the config with the scheduling-only fields (`workers`, `out`) cleared.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 1;
        c.out = None;
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    /// Digest of the fields a classical cell depends on.
    pub(crate) fn classical_fingerprint(&self) -> String {
        let key = serde_json::json!({
            "L": self.chain.sites,
            "couplings": self.params().map(|p| p.couplings().to_vec()).unwrap_or_default(),
            "samples": self.samples_per_window,
            "t_total": self.t_total,
            "renorm": self.renorm,
            "tolerance": self.tolerance,
            "cutoff": self.cutoff,
            "deviation": self.deviation,
            "windows": self.windows,
            "max_attempts": self.max_attempts,
            "bounds": self.bounds,
            "seed": self.seed,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    /// Digest of the fields a quantum cell depends on.
    pub(crate) fn quantum_fingerprint(&self) -> String {
        let key = serde_json::json!({
            "L": self.chain.sites,
            "couplings": self.params().map(|p| p.couplings().to_vec()).unwrap_or_default(),
            "bins": self.bins,
            "pooling": self.kurtosis_pooling,
            "windows": self.windows,
        });
        sha256_hex(key.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_json() {
        let c = SweepConfig::from_json_str("{}").unwrap();
        assert_eq!(c, SweepConfig::default());
        let l = c.lambda_values().unwrap();
        assert_eq!(l.len(), 40);
        assert_eq!((l[0], l[39]), (0.1, 100.0));
        assert!(l.windows(2).all(|w| w[1] > w[0]));
        let ratio = l[1] / l[0];
        assert!(l.windows(2).all(|w| (w[1] / w[0] - ratio).abs() < 1e-12));
        assert_eq!(c.heatmap_bosons(), Some(70));
        assert_eq!(c.active_windows().len(), 100);
    }

    #[test]
    fn grid_forms() {
        let c = SweepConfig::from_json_str(r#"{"lambdas": "reference", "L": 3, "N": 20}"#).unwrap();
        assert_eq!(c.lambda_values().unwrap(), REFERENCE_LAMBDAS.to_vec());
        let c = SweepConfig::from_json_str(r#"{"lambdas": [0.5, 2.0]}"#).unwrap();
        assert_eq!(c.lambda_values().unwrap(), vec![0.5, 2.0]);
        let c = SweepConfig::from_json_str(r#"{"lambdas": {"min": 1, "max": 100, "count": 3}}"#).unwrap();
        let v = c.lambda_values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"lambdas": []}"#,
            r#"{"lambdas": [-1.0]}"#,
            r#"{"windows": 0}"#,
            r#"{"window_subset": [100]}"#,
            r#"{"workers": 0}"#,
            r#"{"L": 1}"#,
            r#"{"heatmap_n": 33}"#,
            r#"{"lambdas": {"min": 0, "max": 1, "count": 4}}"#,
        ] {
            assert!(SweepConfig::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scheduling_fields_do_not_change_the_hash() {
        let a = SweepConfig::default();
        let mut b = a.clone();
        b.workers = 8;
        b.out = Some("/tmp/x".into());
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 1;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_ne!(a.classical_fingerprint(), b.classical_fingerprint());
        assert_eq!(a.quantum_fingerprint(), b.quantum_fingerprint());
    }

    #[test]
    fn roundtrips_through_json() {
        let mut c = SweepConfig::default();
        c.window_subset = Some(vec![3, 1]);
        c.lambdas = LambdaGrid::Values(vec![2.48]);
        let back = SweepConfig::from_json_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.active_windows(), vec![1, 3]);
    }
}

//! CSV exports for scatter panels and histograms.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::classical::{BoundsCell, ClassicalCell};
use super::config::SweepConfig;
use super::quantum::{spectral_grid, spectrum_with_vectors};
use super::store::read_cell;
use crate::error::{Error, Result};
use crate::lattice::{ChainParams, WindowGrid};
use crate::metrics::heatmap::{format_float, format_opt, CsvBuilder};
use crate::metrics::moments::states_in_window;
use crate::metrics::ratios::{histogram, integrate, reference_bin_masses};
use crate::metrics::{spacing_ratios_with_width, Reference};
use crate::quantum::{coefficients_in_basis, make_basis, BasisKind, FockBasis, SpectrumCache};

/// Largest relative distance at which a requested lambda matches a grid value.
pub const LAMBDA_MATCH_TOL: f64 = 0.05;
/// Coefficient histograms cover `sqrt(D) c` in `[-range, range]`.
pub const COEFF_RANGE: f64 = 5.0;

pub const SCATTER_HEADER: &str = "lambda,window_index,E,E_rel,lyapunov,positive";
pub const RATIO_HIST_HEADER: &str = "bin_lo,bin_hi,count,density,density_goe,density_poi";
pub const COEFF_HIST_HEADER: &str = "bin_lo,bin_hi,count,density,density_gaussian";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    FtleScatter,
    RatioHist,
    CoeffHist,
}

impl ExportKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            ExportKind::FtleScatter => "ftle_scatter",
            ExportKind::RatioHist => "ratio_hist",
            ExportKind::CoeffHist => "coeff_hist",
        }
    }
}

impl FromStr for ExportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ftle-scatter" => Ok(ExportKind::FtleScatter),
            "ratio-hist" => Ok(ExportKind::RatioHist),
            "coeff-hist" => Ok(ExportKind::CoeffHist),
            other => Err(Error::UnknownSelector(format!("export kind {other:?}"))),
        }
    }
}

/// Which slice of the data to export.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selector {
    pub lambda: Option<f64>,
    pub window: Option<usize>,
    /// Relative energy; picks the window containing it.
    pub e_rel: Option<f64>,
    pub bosons: Option<u32>,
    pub basis: Option<BasisKind>,
    pub bins: Option<usize>,
}

impl Selector {
    /// Window index for a grid of `count` windows, if one was requested.
    fn window_index(&self, count: usize) -> Result<Option<usize>> {
        match (self.window, self.e_rel) {
            (Some(w), _) if w >= count => Err(Error::UnknownSelector(format!("window {w} of {count}"))),
            (Some(w), _) => Ok(Some(w)),
            (None, Some(e)) if (0.0..=1.0).contains(&e) => {
                let i = (e * count as f64).ceil() as usize;
                Ok(Some(i.clamp(1, count) - 1))
            }
            (None, Some(e)) => Err(Error::UnknownSelector(format!("relative energy {e}"))),
            (None, None) => Ok(None),
        }
    }
}

/// Index of the grid lambda nearest `want`, within [`LAMBDA_MATCH_TOL`].
pub fn match_lambda(grid: &[f64], want: f64) -> Result<usize> {
    let (i, l) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - want).abs().total_cmp(&(b.1 - want).abs()))
        .ok_or_else(|| Error::UnknownSelector("empty lambda grid".into()))?;
    if (l - want).abs() > LAMBDA_MATCH_TOL * want.abs().max(1e-12) {
        return Err(Error::UnknownSelector(format!(
            "lambda {want} is not on the sweep grid"
        )));
    }
    Ok(i)
}

pub fn export(kind: ExportKind, config: &SweepConfig, out: &Path, sel: &Selector) -> Result<String> {
    match kind {
        ExportKind::FtleScatter => ftle_scatter(config, out, sel),
        ExportKind::RatioHist => ratio_histogram(config, out, sel),
        ExportKind::CoeffHist => coefficient_histogram(config, out, sel),
    }
}

/// Largest exponent against energy from the stored classical cells of a sweep in `out`.
pub fn ftle_scatter(config: &SweepConfig, out: &Path, sel: &Selector) -> Result<String> {
    let lambdas = config.lambda_values()?;
    let lis: Vec<usize> = match sel.lambda {
        Some(l) => vec![match_lambda(&lambdas, l)?],
        None => (0..lambdas.len()).collect(),
    };
    let wis: Vec<usize> = match sel.window_index(config.windows)? {
        Some(w) => vec![w],
        None => (0..config.windows).collect(),
    };
    let mut csv = CsvBuilder::new(SCATTER_HEADER);
    for li in lis {
        let bounds = read_cell::<BoundsCell>(&out.join("cells/bounds").join(format!("l{li:03}.json")))
            .filter(|b| b.lambda == lambdas[li]);
        for &wi in &wis {
            let path = out.join("cells/classical").join(format!("l{li:03}_w{wi:03}.json"));
            let Some(cell) = read_cell::<ClassicalCell>(&path).filter(|c| c.lambda == lambdas[li]) else {
                continue;
            };
            for r in cell.records.iter().filter(|r| r.record.valid) {
                let rec = &r.record;
                let e_rel = bounds
                    .as_ref()
                    .map(|b| (rec.energy - b.bounds.e_min) / (b.bounds.e_max - b.bounds.e_min));
                csv.row([
                    format_float(lambdas[li]),
                    wi.to_string(),
                    format_float(rec.energy),
                    format_opt(e_rel),
                    format_float(rec.lyapunov),
                    rec.positive.to_string(),
                ]);
            }
        }
    }
    Ok(csv.finish())
}

fn quantum_point(config: &SweepConfig, sel: &Selector) -> Result<ChainParams> {
    let mut chain = config.chain.clone();
    if let Some(l) = sel.lambda {
        chain.lambda = l;
    }
    if let Some(n) = sel.bosons.or(config.heatmap_n) {
        chain.bosons = n;
    }
    ChainParams::try_from(chain)
}

fn required_window(sel: &Selector, grid: &WindowGrid) -> Result<usize> {
    sel.window_index(grid.len())?
        .ok_or_else(|| Error::UnknownSelector("histogram exports need a window or relative energy".into()))
}

/// Histogram of spacing ratios in one window with the GOE and Poisson bin densities.
pub fn ratio_histogram(config: &SweepConfig, out: &Path, sel: &Selector) -> Result<String> {
    let params = quantum_point(config, sel)?;
    let cache = SpectrumCache::new(config.cache_path(out));
    let bundle = cache.get_or_compute(&params, false)?;
    let e = &bundle.eigenvalues;
    let grid = spectral_grid(e, config.windows)?;
    let w = &grid.windows[required_window(sel, &grid)?];
    let levels: Vec<f64> = states_in_window(e, w).into_iter().map(|k| e[k]).collect();
    let ratios = spacing_ratios_with_width(&levels, grid.e_max - grid.e_min);
    let mut csv = CsvBuilder::new(RATIO_HIST_HEADER);
    if ratios.is_empty() {
        return Ok(csv.finish());
    }
    let bins = sel.bins.unwrap_or(config.bins);
    let masses = histogram(&ratios.values, bins);
    let goe = reference_bin_masses(Reference::Goe, bins);
    let poi = reference_bin_masses(Reference::Poisson, bins);
    let width = 1.0 / bins as f64;
    for i in 0..bins {
        csv.row([
            format_float(i as f64 * width),
            format_float((i + 1) as f64 * width),
            ((masses[i] * ratios.len() as f64).round() as usize).to_string(),
            format_float(masses[i] / width),
            format_float(goe[i] / width),
            format_float(poi[i] / width),
        ]);
    }
    Ok(csv.finish())
}

/// Histogram of `sqrt(D)`-scaled eigenvector coefficients in one window.
pub fn coefficient_histogram(config: &SweepConfig, out: &Path, sel: &Selector) -> Result<String> {
    let params = quantum_point(config, sel)?;
    let cache = SpectrumCache::new(config.cache_path(out));
    let bundle = spectrum_with_vectors(&params, Some(&cache), config.cache_vectors)?;
    let grid = spectral_grid(&bundle.eigenvalues, config.windows)?;
    let w = &grid.windows[required_window(sel, &grid)?];
    let states = states_in_window(&bundle.eigenvalues, w);
    let mut csv = CsvBuilder::new(COEFF_HIST_HEADER);
    if states.is_empty() {
        return Ok(csv.finish());
    }
    let fock = FockBasis::new(params.bosons(), params.sites())?;
    let set = make_basis(sel.basis.unwrap_or(BasisKind::Computational), &params, &fock)?;
    let coeffs = coefficients_in_basis(&bundle, &set)?;
    let scale = (bundle.dim() as f64).sqrt();
    let bins = sel.bins.unwrap_or(config.bins);
    let width = 2.0 * COEFF_RANGE / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for &k in &states {
        for &c in coeffs.col_as_slice(k) {
            total += 1;
            let x = c * scale + COEFF_RANGE;
            if (0.0..2.0 * COEFF_RANGE).contains(&x) {
                counts[((x / width) as usize).min(bins - 1)] += 1;
            }
        }
    }
    let gauss = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for (i, &n) in counts.iter().enumerate() {
        let lo = -COEFF_RANGE + i as f64 * width;
        let hi = lo + width;
        csv.row([
            format_float(lo),
            format_float(hi),
            n.to_string(),
            format_float(n as f64 / total as f64 / width),
            format_float(integrate(gauss, lo, hi, 2) / width),
        ]);
    }
    Ok(csv.finish())
}

//! Quantum `(lambda, N)` sweep: diagonalize, measure every window, fit EEV exponents.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::store::{read_cell, run_jobs, write_atomic, write_cell, CellEntry, CellStatus, RunManifest};
use crate::error::{Error, Result};
use crate::lattice::{ChainParams, WindowGrid};
use crate::metrics::heatmap::{
    format_float, format_opt, write_metrics_csv, CsvBuilder, DisplayTransform, HeatCell, HeatmapTable,
};
use crate::metrics::moments::{eev_sigma, kurtosis_over_states, states_in_window};
use crate::metrics::{fit_scaling_exponent, kl_divergence, mean_ratio_distance, spacing_ratios_with_width, Reference};
use crate::quantum::{
    coefficients_in_basis, eev_hopping, make_basis, spectrum, BasisKind, FockBasis, SpectrumBundle, SpectrumCache,
};

/// Everything measured in one energy window at one `(lambda, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window_index: usize,
    pub e_rel: f64,
    pub n_levels: usize,
    pub n_ratios: usize,
    pub mean_ratio: Option<f64>,
    pub kl_goe: Option<f64>,
    pub kl_poi: Option<f64>,
    pub dist_goe: Option<f64>,
    pub dist_poi: Option<f64>,
    /// Excess kurtosis in the computational, free and perturbed free bases.
    pub kappa: [Option<f64>; 3],
    pub n_states: usize,
    pub eev_sigma: Option<f64>,
}

impl WindowMetrics {
    /// `max(kappa_1, kappa_3)` over the values that exist.
    pub fn kappa_max(&self) -> Option<f64> {
        match (self.kappa[0], self.kappa[2]) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumCell {
    pub fingerprint: String,
    pub lambda_index: usize,
    pub lambda: f64,
    pub bosons: u32,
    pub dim: usize,
    pub status: CellStatus,
    pub runs: u32,
    pub wall_seconds: f64,
    pub error: Option<String>,
    pub windows: Vec<WindowMetrics>,
}

impl QuantumCell {
    pub fn window(&self, index: usize) -> Option<&WindowMetrics> {
        self.windows.iter().find(|w| w.window_index == index)
    }
}

#[derive(Debug, Clone)]
pub struct QuantumOutput {
    pub lambdas: Vec<f64>,
    pub n_list: Vec<u32>,
    /// `cells[lambda_index][n_index]`.
    pub cells: Vec<Vec<QuantumCell>>,
    pub tables: Vec<HeatmapTable>,
    pub manifest: RunManifest,
}

impl QuantumOutput {
    pub fn table(&self, metric: &str) -> Option<&HeatmapTable> {
        self.tables.iter().find(|t| t.metric == metric)
    }
}

/// Loads the spectrum from `cache` or computes it, returning it with eigenvectors.
///
/// Eigenvalues are always cached; eigenvectors only when `cache_vectors` is set.
pub fn spectrum_with_vectors(
    params: &ChainParams,
    cache: Option<&SpectrumCache>,
    cache_vectors: bool,
) -> Result<SpectrumBundle> {
    let Some(cache) = cache else {
        return spectrum(params, true);
    };
    if let Some(b) = cache.load(params, true)? {
        return Ok(b);
    }
    let bundle = spectrum(params, true)?;
    if cache_vectors {
        cache.store(&bundle)?;
    } else if cache.load(params, false)?.is_none() {
        cache.store(&SpectrumBundle {
            params: params.clone(),
            eigenvalues: bundle.eigenvalues.clone(),
            eigenvectors: None,
        })?;
    }
    Ok(bundle)
}

/// Window grid spanning the extreme eigenvalues.
pub fn spectral_grid(eigenvalues: &[f64], windows: usize) -> Result<WindowGrid> {
    match (eigenvalues.first(), eigenvalues.last()) {
        (Some(&lo), Some(&hi)) => WindowGrid::new(lo, hi, windows),
        _ => Err(Error::Undefined("empty spectrum")),
    }
}

/// Per-window metrics of a spectrum with eigenvectors, for the windows in `active`.
pub fn window_metrics(config: &SweepConfig, bundle: &SpectrumBundle, active: &[usize]) -> Result<Vec<WindowMetrics>> {
    let params = &bundle.params;
    let vectors = bundle
        .eigenvectors
        .as_ref()
        .ok_or(Error::Undefined("spectrum was computed without eigenvectors"))?;
    let e = &bundle.eigenvalues;
    let grid = spectral_grid(e, config.windows)?;
    let width = grid.e_max - grid.e_min;
    let fock = FockBasis::new(params.bosons(), params.sites())?;
    let eevs = eev_hopping(bundle, &fock)?;

    let mut out: Vec<WindowMetrics> = active
        .iter()
        .map(|&wi| {
            let w = &grid.windows[wi];
            let states = states_in_window(e, w);
            let levels: Vec<f64> = states.iter().map(|&k| e[k]).collect();
            let ratios = spacing_ratios_with_width(&levels, width);
            let (sigma, n_states) = eev_sigma(&eevs, e, w);
            WindowMetrics {
                window_index: wi,
                e_rel: w.e_rel_hi,
                n_levels: levels.len(),
                n_ratios: ratios.len(),
                mean_ratio: ratios.mean(),
                kl_goe: kl_divergence(&ratios, Reference::Goe, config.bins),
                kl_poi: kl_divergence(&ratios, Reference::Poisson, config.bins),
                dist_goe: mean_ratio_distance(&ratios, Reference::Goe),
                dist_poi: mean_ratio_distance(&ratios, Reference::Poisson),
                kappa: [
                    kurtosis_over_states(vectors, &states, config.kurtosis_pooling),
                    None,
                    None,
                ],
                n_states,
                eev_sigma: sigma,
            }
        })
        .collect();

    // One rotated coefficient matrix alive at a time.
    for kind in [BasisKind::Free, BasisKind::PerturbedFree] {
        if kind == BasisKind::PerturbedFree && params.sites() != 3 {
            continue;
        }
        let set = make_basis(kind, params, &fock)?;
        let coeffs = coefficients_in_basis(bundle, &set)?;
        drop(set);
        for m in &mut out {
            let states = states_in_window(e, &grid.windows[m.window_index]);
            m.kappa[kind.label() - 1] = kurtosis_over_states(&coeffs, &states, config.kurtosis_pooling);
        }
    }
    Ok(out)
}

fn cell_path(out: &Path, li: usize, n: u32) -> PathBuf {
    out.join("cells").join("quantum").join(format!("l{li:03}_n{n:04}.json"))
}

fn fingerprint(config: &SweepConfig, lambda: f64, n: u32) -> String {
    format!("{}:{}:{n}", config.quantum_fingerprint(), lambda.to_bits())
}

/// Metrics at one `(lambda, N)`.
pub fn compute_quantum_cell(
    config: &SweepConfig,
    params: &ChainParams,
    lambda_index: usize,
    cache: Option<&SpectrumCache>,
) -> Result<QuantumCell> {
    let bundle = spectrum_with_vectors(params, cache, config.cache_vectors)?;
    let windows = window_metrics(config, &bundle, &config.active_windows())?;
    Ok(QuantumCell {
        fingerprint: fingerprint(config, params.lambda(), params.bosons()),
        lambda_index,
        lambda: params.lambda(),
        bosons: params.bosons(),
        dim: bundle.dim(),
        status: CellStatus::Done,
        runs: 0,
        wall_seconds: 0.0,
        error: None,
        windows,
    })
}

/// Runs, or resumes, the quantum sweep and writes its tables into `out`.
pub fn run_quantum_sweep(config: &SweepConfig, out: &Path) -> Result<QuantumOutput> {
    config.validate()?;
    if config.n_list.is_empty() {
        return Err(Error::Config("quantum sweep needs a non-empty n_list".into()));
    }
    let start = Instant::now();
    let lambdas = config.lambda_values()?;
    let mut n_list = config.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let base = config.params()?;
    let cache = SpectrumCache::new(config.cache_path(out));

    let mut slots: Vec<Vec<Option<QuantumCell>>> = vec![vec![None; n_list.len()]; lambdas.len()];
    let mut reused = vec![vec![false; n_list.len()]; lambdas.len()];
    let mut jobs = Vec::new();
    for (li, &lambda) in lambdas.iter().enumerate() {
        for (ni, &n) in n_list.iter().enumerate() {
            let previous = read_cell::<QuantumCell>(&cell_path(out, li, n))
                .filter(|c| c.fingerprint == fingerprint(config, lambda, n));
            match previous {
                Some(c) if c.status.is_final() && covers(&c, &config.active_windows()) => {
                    slots[li][ni] = Some(c);
                    reused[li][ni] = true;
                }
                prev => jobs.push((li, ni, prev.map_or(0, |c| c.runs))),
            }
        }
    }
    info!(
        "quantum sweep: {} lambdas x {} boson numbers, {} diagonalizations to run",
        lambdas.len(),
        n_list.len(),
        jobs.len()
    );

    let total = jobs.len();
    let mut finished = 0;
    run_jobs(
        config.workers,
        &jobs,
        |&(li, ni, _)| {
            let params = ChainParams::new(base.sites(), Some(base.couplings().to_vec()), lambdas[li], n_list[ni])?;
            compute_quantum_cell(config, &params, li, Some(&cache))
        },
        |&(li, ni, runs), outcome| {
            let n = n_list[ni];
            let mut cell = outcome.result.unwrap_or_else(|e| QuantumCell {
                fingerprint: fingerprint(config, lambdas[li], n),
                lambda_index: li,
                lambda: lambdas[li],
                bosons: n,
                dim: 0,
                status: CellStatus::Failed,
                runs: 0,
                wall_seconds: 0.0,
                error: Some(e),
                windows: Vec::new(),
            });
            cell.runs = runs + 1;
            cell.wall_seconds = outcome.wall_seconds;
            finished += 1;
            info!(
                "[{finished}/{total}] lambda={} N={n} D={}: {:?}, {:.1}s",
                lambdas[li], cell.dim, cell.status, cell.wall_seconds
            );
            write_cell(&cell_path(out, li, n), &cell)?;
            slots[li][ni] = Some(cell);
            Ok(())
        },
    )?;
    let cells: Vec<Vec<QuantumCell>> = slots
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| c.expect("every cell is run or reused"))
                .collect()
        })
        .collect();

    let heat_n = config.heatmap_bosons().expect("n_list is not empty");
    let heat_ni = n_list.iter().position(|&n| n == heat_n).expect("validated");
    let tables = assemble(config, &lambdas, &cells, heat_ni)?;
    let mut artifacts = Vec::new();
    for t in &tables {
        let name = format!("heatmap_{}.csv", t.metric);
        write_atomic(&out.join(&name), t.to_csv().as_bytes())?;
        artifacts.push(name);
    }
    let mut metrics = Vec::new();
    write_metrics_csv(&mut metrics, &tables).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("metrics.csv"), &metrics)?;
    artifacts.push("metrics.csv".into());
    write_atomic(&out.join("window_metrics.csv"), window_metrics_csv(&cells).as_bytes())?;
    artifacts.push("window_metrics.csv".into());

    let mut entries = Vec::new();
    for (li, row) in cells.iter().enumerate() {
        for (ni, c) in row.iter().enumerate() {
            entries.push(CellEntry {
                lambda_index: li,
                lambda: lambdas[li],
                coordinate: c.bosons as usize,
                status: c.status,
                reused: reused[li][ni],
                runs: c.runs,
                attempts: 0,
                wall_seconds: c.wall_seconds,
                error: c.error.clone(),
                file: cell_path(Path::new(""), li, c.bosons).display().to_string(),
            });
        }
    }
    let reused_count = entries.iter().filter(|e| e.reused).count();
    let manifest = RunManifest {
        kind: "quantum".into(),
        config_hash: config.config_hash(),
        seed: config.seed,
        workers: config.workers,
        wall_seconds: start.elapsed().as_secs_f64(),
        computed: entries.len() - reused_count,
        reused: reused_count,
        cells: entries,
        artifacts,
    };
    manifest.write(out)?;
    Ok(QuantumOutput {
        lambdas,
        n_list,
        cells,
        tables,
        manifest,
    })
}

fn covers(cell: &QuantumCell, active: &[usize]) -> bool {
    active.iter().all(|&w| cell.window(w).is_some())
}

fn assemble(
    config: &SweepConfig,
    lambdas: &[f64],
    cells: &[Vec<QuantumCell>],
    heat_ni: usize,
) -> Result<Vec<HeatmapTable>> {
    let caps = config.caps;
    let mk = |name: &str, t: DisplayTransform| HeatmapTable::empty(name, t, lambdas.to_vec(), config.windows);
    let mut kl_goe = mk("kl_goe", caps.kl());
    let mut kl_poi = mk("kl_poi", caps.kl());
    let mut mean_ratio = mk("mean_ratio", DisplayTransform::Identity);
    let mut dist_goe = mk("ratio_distance_goe", DisplayTransform::Identity);
    let mut dist_poi = mk("ratio_distance_poi", DisplayTransform::Identity);
    let mut kappa: Vec<HeatmapTable> = (1..=3).map(|k| mk(&format!("kurtosis_{k}"), caps.kurtosis())).collect();
    let mut kappa_max = mk("kurtosis", caps.kurtosis());
    let mut sigma = mk("eev_sigma", DisplayTransform::Identity);
    let mut exponent = mk("eev_exponent", caps.exponent());

    for (li, row) in cells.iter().enumerate() {
        let heat = &row[heat_ni];
        for m in &heat.windows {
            let wi = m.window_index;
            kl_goe.set(li, wi, HeatCell::new(m.kl_goe, m.n_ratios));
            kl_poi.set(li, wi, HeatCell::new(m.kl_poi, m.n_ratios));
            mean_ratio.set(li, wi, HeatCell::new(m.mean_ratio, m.n_ratios));
            dist_goe.set(li, wi, HeatCell::new(m.dist_goe, m.n_ratios));
            dist_poi.set(li, wi, HeatCell::new(m.dist_poi, m.n_ratios));
            for (k, t) in kappa.iter_mut().enumerate() {
                t.set(li, wi, HeatCell::new(m.kappa[k], m.n_states));
            }
            kappa_max.set(li, wi, HeatCell::new(m.kappa_max(), m.n_states));
            sigma.set(li, wi, HeatCell::new(m.eev_sigma, m.n_states));
        }
        for wi in config.active_windows() {
            let points: Vec<(f64, f64)> = row
                .iter()
                .filter(|c| c.status == CellStatus::Done)
                .filter_map(|c| Some((c.dim as f64, c.window(wi)?.eev_sigma?)))
                .collect();
            let e = fit_scaling_exponent(&points)?;
            exponent.set(li, wi, HeatCell::new(e, points.len()));
        }
    }
    let mut tables = vec![kl_goe, kl_poi, mean_ratio, dist_goe, dist_poi];
    tables.extend(kappa);
    tables.extend([kappa_max, sigma, exponent]);
    Ok(tables)
}

pub const WINDOW_METRICS_HEADER: &str = "lambda,N,dim,window_index,E_rel,n_levels,n_ratios,mean_ratio,kl_goe,kl_poi,\
ratio_distance_goe,ratio_distance_poi,kurtosis_1,kurtosis_2,kurtosis_3,n_states,eev_sigma";

/// Every measured window at every `(lambda, N)`, in long form.
pub fn window_metrics_csv<'a>(cells: impl IntoIterator<Item = &'a Vec<QuantumCell>>) -> String {
    let o = format_opt;
    let mut csv = CsvBuilder::new(WINDOW_METRICS_HEADER);
    for c in cells.into_iter().flatten() {
        for m in &c.windows {
            csv.row([
                format_float(c.lambda),
                c.bosons.to_string(),
                c.dim.to_string(),
                m.window_index.to_string(),
                format_float(m.e_rel),
                m.n_levels.to_string(),
                m.n_ratios.to_string(),
                o(m.mean_ratio),
                o(m.kl_goe),
                o(m.kl_poi),
                o(m.dist_goe),
                o(m.dist_poi),
                o(m.kappa[0]),
                o(m.kappa[1]),
                o(m.kappa[2]),
                m.n_states.to_string(),
                o(m.eev_sigma),
            ]);
        }
    }
    csv.finish()
}

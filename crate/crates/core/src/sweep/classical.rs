//! Classical `(lambda, window)` sweep: bounds, rejection sampling and FTLEs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::store::{
    derive_seed, read_cell, run_jobs, sample_seed, write_atomic, write_cell, CellEntry, CellStatus, RunManifest,
};
use crate::classical::sampling::seeded_rng;
use crate::classical::{classical_energy_bounds, ftle_max, sample_in_window, EnergyBounds, FtleRecord};
use crate::error::{Error, Result};
use crate::lattice::{ChainParams, WindowGrid};
use crate::metrics::heatmap::{
    format_float, format_opt, write_metrics_csv, CsvBuilder, DisplayTransform, HeatCell, HeatmapTable,
};
use crate::metrics::{column_max, positive_fraction, rescaled_mean_ftle, Rescale};

/// Seed offset for the deviation vector, so it is independent of the sampled state.
const DEVIATION_STREAM: u64 = 1;
/// Window-index slot reserved for the bounds search seed.
const BOUNDS_SLOT: u64 = u64::MAX;

pub const FTLE_RECORDS_HEADER: &str = "lambda,window_index,sample,seed,E,E_rel,t_total,lyapunov,positive,valid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRecord {
    pub sample: usize,
    pub seed: u64,
    pub record: FtleRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsCell {
    pub fingerprint: String,
    pub lambda_index: usize,
    pub lambda: f64,
    pub bounds: EnergyBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCell {
    pub fingerprint: String,
    pub lambda_index: usize,
    pub lambda: f64,
    pub window_index: usize,
    pub status: CellStatus,
    pub runs: u32,
    pub attempts: u64,
    /// Sampling stopped early because a draw ran out of attempts.
    pub exhausted: bool,
    pub wall_seconds: f64,
    pub error: Option<String>,
    pub records: Vec<SampledRecord>,
}

/// Result of a classical sweep.
#[derive(Debug, Clone)]
pub struct ClassicalOutput {
    pub lambdas: Vec<f64>,
    pub bounds: Vec<Option<EnergyBounds>>,
    pub positive_fraction: HeatmapTable,
    pub ftle_beta: HeatmapTable,
    pub ftle_gamma: HeatmapTable,
    /// `cells[lambda_index][window_index]`, `None` where nothing was run.
    pub cells: Vec<Vec<Option<ClassicalCell>>>,
    pub manifest: RunManifest,
}

impl ClassicalOutput {
    pub fn records(&self, lambda_index: usize, window_index: usize) -> &[SampledRecord] {
        self.cells[lambda_index][window_index]
            .as_ref()
            .map_or(&[], |c| c.records.as_slice())
    }
}

fn bounds_path(out: &Path, li: usize) -> PathBuf {
    out.join("cells").join("bounds").join(format!("l{li:03}.json"))
}

fn cell_path(out: &Path, li: usize, wi: usize) -> PathBuf {
    out.join("cells")
        .join("classical")
        .join(format!("l{li:03}_w{wi:03}.json"))
}

fn fingerprint(config: &SweepConfig, lambda: f64) -> String {
    format!("{}:{}", config.classical_fingerprint(), lambda.to_bits())
}

/// Energy bounds for every lambda, reusing stored ones.
fn lambda_bounds(
    config: &SweepConfig,
    out: &Path,
    lambdas: &[f64],
) -> Result<Vec<std::result::Result<EnergyBounds, String>>> {
    let base = config.params()?;
    let mut result: Vec<Option<std::result::Result<EnergyBounds, String>>> = vec![None; lambdas.len()];
    let mut todo = Vec::new();
    for (li, &lambda) in lambdas.iter().enumerate() {
        match read_cell::<BoundsCell>(&bounds_path(out, li)) {
            Some(c) if c.fingerprint == fingerprint(config, lambda) => result[li] = Some(Ok(c.bounds)),
            _ => todo.push(li),
        }
    }
    run_jobs(
        config.workers,
        &todo,
        |&li| {
            let params = base.with_lambda(lambdas[li])?;
            let b = classical_energy_bounds(
                &params,
                &config.bounds,
                derive_seed(config.seed, &[li as u64, BOUNDS_SLOT]),
            );
            if !b.converged {
                warn!("energy bounds at lambda={} hit the iteration cap", lambdas[li]);
            }
            Ok(b)
        },
        |&li, outcome| {
            if let Ok(b) = &outcome.result {
                let cell = BoundsCell {
                    fingerprint: fingerprint(config, lambdas[li]),
                    lambda_index: li,
                    lambda: lambdas[li],
                    bounds: b.clone(),
                };
                write_cell(&bounds_path(out, li), &cell)?;
            }
            result[li] = Some(outcome.result);
            Ok(())
        },
    )?;
    Ok(result.into_iter().map(|r| r.expect("every lambda visited")).collect())
}

/// Samples and integrates one window.
pub fn compute_cell(
    config: &SweepConfig,
    params: &ChainParams,
    grid: &WindowGrid,
    lambda_index: usize,
    window_index: usize,
) -> Result<ClassicalCell> {
    let window = grid.windows[window_index];
    let opts = config.ftle_options();
    let mut records = Vec::with_capacity(config.samples_per_window);
    let mut attempts = 0;
    let mut exhausted = false;
    for s in 0..config.samples_per_window {
        let seed = sample_seed(config.seed, lambda_index, window_index, s);
        let mut rng = seeded_rng(seed);
        match sample_in_window(params, &window, config.max_attempts, &mut rng) {
            Ok(sample) => {
                attempts += sample.attempts;
                let record = ftle_max(&sample.state, params, &opts, derive_seed(seed, &[DEVIATION_STREAM]));
                records.push(SampledRecord {
                    sample: s,
                    seed,
                    record,
                });
            }
            Err(Error::Exhausted { attempts: a }) => {
                attempts += a;
                exhausted = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ClassicalCell {
        fingerprint: fingerprint(config, params.lambda()),
        lambda_index,
        lambda: params.lambda(),
        window_index,
        status: if records.is_empty() && exhausted {
            CellStatus::Empty
        } else {
            CellStatus::Done
        },
        runs: 0,
        attempts,
        exhausted,
        wall_seconds: 0.0,
        error: None,
        records,
    })
}

/// Runs, or resumes, the classical sweep and writes its tables into `out`.
pub fn run_classical_sweep(config: &SweepConfig, out: &Path) -> Result<ClassicalOutput> {
    config.validate()?;
    let start = Instant::now();
    let lambdas = config.lambda_values()?;
    let active = config.active_windows();
    let base = config.params()?;
    let bounds = lambda_bounds(config, out, &lambdas)?;

    let mut grids = Vec::with_capacity(lambdas.len());
    for b in &bounds {
        grids.push(match b {
            Ok(b) => WindowGrid::new(b.e_min, b.e_max, config.windows).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        });
    }

    let mut cells: Vec<Vec<Option<ClassicalCell>>> = vec![vec![None; config.windows]; lambdas.len()];
    let mut reused = vec![vec![false; config.windows]; lambdas.len()];
    let mut jobs = Vec::new();
    for (li, &lambda) in lambdas.iter().enumerate() {
        for &wi in &active {
            let previous = read_cell::<ClassicalCell>(&cell_path(out, li, wi))
                .filter(|c| c.fingerprint == fingerprint(config, lambda));
            match previous {
                Some(c) if c.status.is_final() => {
                    cells[li][wi] = Some(c);
                    reused[li][wi] = true;
                }
                prev => {
                    let runs = prev.map_or(0, |c| c.runs);
                    jobs.push((li, wi, runs));
                }
            }
        }
    }
    info!(
        "classical sweep: {} lambdas x {} windows, {} cells to compute",
        lambdas.len(),
        active.len(),
        jobs.len()
    );

    let total = jobs.len();
    let mut finished = 0;
    run_jobs(
        config.workers,
        &jobs,
        |&(li, wi, _)| {
            let grid = grids[li]
                .as_ref()
                .map_err(|e| Error::Config(format!("no energy bounds: {e}")))?;
            compute_cell(config, &base.with_lambda(lambdas[li])?, grid, li, wi)
        },
        |&(li, wi, runs), outcome| {
            let mut cell = outcome.result.unwrap_or_else(|e| ClassicalCell {
                fingerprint: fingerprint(config, lambdas[li]),
                lambda_index: li,
                lambda: lambdas[li],
                window_index: wi,
                status: CellStatus::Failed,
                runs: 0,
                attempts: 0,
                exhausted: false,
                wall_seconds: 0.0,
                error: Some(e),
                records: Vec::new(),
            });
            cell.runs = runs + 1;
            cell.wall_seconds = outcome.wall_seconds;
            finished += 1;
            info!(
                "[{finished}/{total}] lambda={} window={wi}: {:?}, {} samples, {:.1}s",
                lambdas[li],
                cell.status,
                cell.records.len(),
                cell.wall_seconds
            );
            write_cell(&cell_path(out, li, wi), &cell)?;
            cells[li][wi] = Some(cell);
            Ok(())
        },
    )?;

    let tables = assemble(config, &lambdas, &cells);
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
    write_atomic(
        &out.join("ftle_records.csv"),
        records_csv(&lambdas, &bounds, &cells).as_bytes(),
    )?;
    artifacts.push("ftle_records.csv".into());
    write_atomic(&out.join("bounds.csv"), bounds_csv(&lambdas, &bounds).as_bytes())?;
    artifacts.push("bounds.csv".into());

    let mut entries = Vec::new();
    for (li, &lambda) in lambdas.iter().enumerate() {
        for &wi in &active {
            let c = cells[li][wi].as_ref().expect("every active cell is run or reused");
            entries.push(CellEntry {
                lambda_index: li,
                lambda,
                coordinate: wi,
                status: c.status,
                reused: reused[li][wi],
                runs: c.runs,
                attempts: c.attempts,
                wall_seconds: c.wall_seconds,
                error: c.error.clone(),
                file: cell_path(Path::new(""), li, wi).display().to_string(),
            });
        }
    }
    let reused_count = entries.iter().filter(|e| e.reused).count();
    let manifest = RunManifest {
        kind: "classical".into(),
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

    let mut tables = tables.into_iter();
    Ok(ClassicalOutput {
        bounds: bounds.into_iter().map(|b| b.ok()).collect(),
        positive_fraction: tables.next().expect("three tables"),
        ftle_beta: tables.next().expect("three tables"),
        ftle_gamma: tables.next().expect("three tables"),
        lambdas,
        cells,
        manifest,
    })
}

fn records_of(cell: &Option<ClassicalCell>) -> Vec<FtleRecord> {
    cell.iter()
        .flat_map(|c| c.records.iter().map(|r| r.record.clone()))
        .collect()
}

/// The three classical heatmaps: positive fraction, beta- and gamma-rescaled means.
fn assemble(config: &SweepConfig, lambdas: &[f64], cells: &[Vec<Option<ClassicalCell>>]) -> Vec<HeatmapTable> {
    let mk = |name: &str| HeatmapTable::empty(name, DisplayTransform::Identity, lambdas.to_vec(), config.windows);
    let (mut frac, mut beta, mut gamma) = (mk("positive_fraction"), mk("ftle_beta"), mk("ftle_gamma"));
    for (li, row) in cells.iter().enumerate() {
        let per_window: Vec<Vec<FtleRecord>> = row.iter().map(records_of).collect();
        let gmax = column_max(per_window.iter().map(|w| w.as_slice()));
        for (wi, recs) in per_window.iter().enumerate() {
            let n = recs.iter().filter(|r| r.valid).count();
            frac.set(li, wi, HeatCell::new(positive_fraction(recs, config.cutoff), n));
            beta.set(
                li,
                wi,
                HeatCell::new(rescaled_mean_ftle(recs, Rescale::Beta, lambdas[li], 0.0), n),
            );
            let g = gmax.and_then(|g| rescaled_mean_ftle(recs, Rescale::Gamma, lambdas[li], g));
            gamma.set(li, wi, HeatCell::new(g, n));
        }
    }
    vec![frac, beta, gamma]
}

fn records_csv(
    lambdas: &[f64],
    bounds: &[std::result::Result<EnergyBounds, String>],
    cells: &[Vec<Option<ClassicalCell>>],
) -> String {
    let mut csv = CsvBuilder::new(FTLE_RECORDS_HEADER);
    for (li, row) in cells.iter().enumerate() {
        for c in row.iter().flatten() {
            for r in &c.records {
                let rec = &r.record;
                let e_rel = bounds[li]
                    .as_ref()
                    .ok()
                    .map(|b| (rec.energy - b.e_min) / (b.e_max - b.e_min));
                csv.row([
                    format_float(lambdas[li]),
                    c.window_index.to_string(),
                    r.sample.to_string(),
                    r.seed.to_string(),
                    format_float(rec.energy),
                    format_opt(e_rel),
                    format_float(rec.t_total),
                    format_float(rec.lyapunov),
                    rec.positive.to_string(),
                    rec.valid.to_string(),
                ]);
            }
        }
    }
    csv.finish()
}

fn bounds_csv(lambdas: &[f64], bounds: &[std::result::Result<EnergyBounds, String>]) -> String {
    let mut csv = CsvBuilder::new("lambda,e_min,e_max,converged");
    for (l, b) in lambdas.iter().zip(bounds) {
        let b = b.as_ref().ok();
        csv.row([
            format_float(*l),
            format_opt(b.map(|b| b.e_min)),
            format_opt(b.map(|b| b.e_max)),
            b.is_some_and(|b| b.converged).to_string(),
        ]);
    }
    csv.finish()
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bhchaos::classical::classical_energy_bounds;
use bhchaos::metrics::heatmap::{format_float, format_opt, CsvBuilder};
use bhchaos::quantum::{BasisKind, SpectrumCache};
use bhchaos::sweep::quantum::{compute_quantum_cell, window_metrics_csv};
use bhchaos::sweep::store::{derive_seed, write_atomic};
use bhchaos::sweep::{
    export, run_classical_sweep, run_quantum_sweep, ExportKind, LambdaGrid, RunManifest, Selector, SweepConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

#[derive(Parser)]
#[command(
    name = "bhchaos",
    version,
    about = "Classical and quantum chaos indicators for the Bose-Hubbard chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON sweep configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Point {
    /// Interaction strength, overriding the config's `lambda`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Boson number, overriding the config's `N`.
    #[arg(long = "n")]
    bosons: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    Computational,
    Free,
    PerturbedFree,
}

#[derive(Subcommand)]
enum Command {
    /// FTLE heatmaps over the lambda grid.
    ClassicalSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_total: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Level statistics, kurtosis and EEV heatmaps over the lambda grid and N list.
    QuantumSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated boson numbers.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<u32>>,
    },
    /// Classical energy extremes on the unit norm sphere.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
    },
    /// FTLE samples in selected windows at one lambda.
    Ftle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        /// Window indices; all windows when omitted.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<usize>>,
        #[arg(long)]
        t_total: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Diagonalize one chain and write its eigenvalues.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        /// Also cache eigenvectors.
        #[arg(long)]
        vectors: bool,
    },
    /// Per-window quantum metrics at one (lambda, N).
    Metrics {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
    },
    /// Scatter and histogram tables for plotting.
    Export {
        #[command(flatten)]
        common: Common,
        /// ftle-scatter, ratio-hist or coeff-hist.
        #[arg(long)]
        kind: String,
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        e_rel: Option<f64>,
        #[arg(long, value_enum)]
        basis: Option<Basis>,
        #[arg(long)]
        bins: Option<usize>,
        /// Output file name inside `--out`.
        #[arg(long)]
        file: Option<String>,
    },
}

fn load(common: &Common) -> Result<(SweepConfig, PathBuf)> {
    let mut config = match &common.config {
        Some(p) => SweepConfig::from_json_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => SweepConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(w) = common.workers {
        config.workers = w;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("bhchaos-out"));
    config.out = Some(out.clone());
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((config, out))
}

fn apply_point(config: &mut SweepConfig, point: &Point) {
    if let Some(l) = point.lambda {
        config.chain.lambda = l;
    }
    if let Some(n) = point.bosons {
        config.chain.bosons = n;
    }
}

fn report(manifest: &RunManifest, out: &Path) -> Result<ExitCode> {
    let failed = manifest.failed();
    println!(
        "{} cells: {} computed, {} reused, {failed} failed; results in {}",
        manifest.cells.len(),
        manifest.computed,
        manifest.reused,
        out.display()
    );
    if failed > 0 {
        for c in manifest.cells.iter().filter(|c| c.error.is_some()) {
            warn!(
                "lambda={} at {}: {}",
                c.lambda,
                c.coordinate,
                c.error.as_deref().unwrap_or("")
            );
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ClassicalSweep {
            common,
            t_total,
            samples,
        } => {
            let (mut config, out) = load(&common)?;
            if let Some(t) = t_total {
                config.t_total = t;
            }
            if let Some(s) = samples {
                config.samples_per_window = s;
            }
            let result = run_classical_sweep(&config, &out)?;
            report(&result.manifest, &out)
        }
        Command::QuantumSweep { common, n_list } => {
            let (mut config, out) = load(&common)?;
            if let Some(n) = n_list {
                config.n_list = n;
                config.heatmap_n = None;
            }
            let result = run_quantum_sweep(&config, &out)?;
            report(&result.manifest, &out)
        }
        Command::Bounds { common, point } => {
            let (mut config, out) = load(&common)?;
            apply_point(&mut config, &point);
            let params = config.params()?;
            let bounds = classical_energy_bounds(&params, &config.bounds, derive_seed(config.seed, &[u64::MAX]));
            let json = serde_json::to_string_pretty(&bounds)?;
            write_atomic(&out.join("bounds.json"), json.as_bytes())?;
            println!("{json}");
            Ok(if bounds.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Ftle {
            common,
            point,
            window,
            t_total,
            samples,
        } => {
            let (mut config, out) = load(&common)?;
            apply_point(&mut config, &point);
            config.lambdas = LambdaGrid::Values(vec![config.chain.lambda]);
            if let Some(w) = window {
                config.window_subset = Some(w);
            }
            if let Some(t) = t_total {
                config.t_total = t;
            }
            if let Some(s) = samples {
                config.samples_per_window = s;
            }
            let result = run_classical_sweep(&config, &out)?;
            report(&result.manifest, &out)
        }
        Command::Spectrum { common, point, vectors } => {
            let (mut config, out) = load(&common)?;
            apply_point(&mut config, &point);
            let params = config.params()?;
            let cache = SpectrumCache::new(config.cache_path(&out));
            let bundle = cache.get_or_compute(&params, vectors)?;
            let e = &bundle.eigenvalues;
            let (lo, hi) = (e[0], e[e.len() - 1]);
            let mut csv = CsvBuilder::new("index,E,E_rel");
            for (i, &x) in e.iter().enumerate() {
                let rel = (hi > lo).then(|| (x - lo) / (hi - lo));
                csv.row([i.to_string(), format_float(x), format_opt(rel)]);
            }
            write_atomic(&out.join("eigenvalues.csv"), csv.finish().as_bytes())?;
            info!("cached at {}", cache.path_for(&params).display());
            println!(
                "D={} E in [{lo}, {hi}]; eigenvalues in {}",
                bundle.dim(),
                out.join("eigenvalues.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { common, point } => {
            let (mut config, out) = load(&common)?;
            apply_point(&mut config, &point);
            let params = config.params()?;
            let cache = SpectrumCache::new(config.cache_path(&out));
            let cell = compute_quantum_cell(&config, &params, 0, Some(&cache))?;
            let path = out.join("window_metrics.csv");
            write_atomic(&path, window_metrics_csv([&vec![cell]]).as_bytes())?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Export {
            common,
            kind,
            point,
            window,
            e_rel,
            basis,
            bins,
            file,
        } => {
            let (config, out) = load(&common)?;
            let kind: ExportKind = kind.parse()?;
            let selector = Selector {
                lambda: point.lambda,
                window,
                e_rel,
                bosons: point.bosons,
                basis: basis.map(|b| match b {
                    Basis::Computational => BasisKind::Computational,
                    Basis::Free => BasisKind::Free,
                    Basis::PerturbedFree => BasisKind::PerturbedFree,
                }),
                bins,
            };
            let csv = export(kind, &config, &out, &selector)?;
            let name = file.unwrap_or_else(|| format!("{}.csv", kind.file_stem()));
            if name.contains(std::path::MAIN_SEPARATOR) {
                bail!("--file is a name inside --out, got {name}");
            }
            let path = out.join(name);
            write_atomic(&path, csv.as_bytes())?;
            println!("{} ({} rows)", path.display(), csv.lines().count().saturating_sub(1));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Per-cell result files, the run manifest and the job runner.
//!
//! Every finished cell is written to its own JSON file under `<out>/cells/` as soon
//! as it completes. A rerun reuses every file whose fingerprint still matches, so an
//! interrupted sweep only computes what is missing. Heatmaps are always assembled
//! from these files.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Seed for one job, from the master seed and the job coordinates only.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Per-sample seed of a classical cell.
pub fn sample_seed(master: u64, lambda_index: usize, window_index: usize, sample: usize) -> u64 {
    derive_seed(master, &[lambda_index as u64, window_index as u64, sample as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Done,
    /// Sampling exhausted before any state was found.
    Empty,
    Failed,
}

impl CellStatus {
    pub fn is_final(self) -> bool {
        self != CellStatus::Failed
    }
}

/// Manifest line for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub lambda_index: usize,
    pub lambda: f64,
    /// Window index (classical) or boson number (quantum).
    pub coordinate: usize,
    pub status: CellStatus,
    /// True when the result was read back from an earlier run.
    pub reused: bool,
    /// How many times the cell has been computed, failures included.
    pub runs: u32,
    /// Rejection-sampling draws (classical only).
    pub attempts: u64,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_seconds: f64,
    pub computed: usize,
    pub reused: usize,
    pub cells: Vec<CellEntry>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join("manifest.json");
        write_atomic(&path, &serde_json::to_vec_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(out: &Path) -> Result<Self> {
        let path = out.join("manifest.json");
        let s = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&s)?)
    }
}

/// Writes through a temporary file so a crash never leaves a truncated result.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("part");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads a cell file; unreadable or corrupt files count as missing.
pub fn read_cell<T: DeserializeOwned>(path: &Path) -> Option<T> {
    let bytes = fs::read(path).ok()?;
    match serde_json::from_slice(&bytes) {
        Ok(v) => Some(v),
        Err(e) => {
            warn!("ignoring unreadable cell file {}: {e}", path.display());
            None
        }
    }
}

pub fn write_cell<T: Serialize>(path: &Path, cell: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_vec(cell)?)
}

/// Result of one job, with failures and panics captured.
pub struct JobOutcome<R> {
    pub result: std::result::Result<R, String>,
    pub wall_seconds: f64,
}

/// Runs `compute` over `jobs` on `workers` threads.
///
/// Workers only compute; each outcome is handed to `persist` on the calling thread,
/// which is therefore the single writer. At most `workers` jobs run at once.
pub fn run_jobs<J, R, F, P>(workers: usize, jobs: &[J], compute: F, mut persist: P) -> Result<()>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R> + Sync,
    P: FnMut(&J, JobOutcome<R>) -> Result<()>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, JobOutcome<R>)>();
    let mut first_err = None;
    std::thread::scope(|s| {
        s.spawn(|| {
            pool.install(|| {
                (0..jobs.len())
                    .into_par_iter()
                    .with_max_len(1)
                    .for_each_with(tx, |tx, i| {
                        let start = Instant::now();
                        let result = match catch_unwind(AssertUnwindSafe(|| compute(&jobs[i]))) {
                            Ok(Ok(r)) => Ok(r),
                            Ok(Err(e)) => Err(e.to_string()),
                            Err(p) => Err(panic_message(&p)),
                        };
                        let outcome = JobOutcome {
                            result,
                            wall_seconds: start.elapsed().as_secs_f64(),
                        };
                        let _ = tx.send((i, outcome));
                    });
            });
        });
        for (i, outcome) in rx {
            if let Err(e) = persist(&jobs[i], outcome) {
                warn!("could not persist job {i}: {e}");
                first_err.get_or_insert(e);
            }
        }
    });
    first_err.map_or(Ok(()), Err)
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn seeds_depend_only_on_coordinates() {
        let a = sample_seed(7, 1, 2, 3);
        assert_eq!(a, sample_seed(7, 1, 2, 3));
        let others = [
            sample_seed(8, 1, 2, 3),
            sample_seed(7, 2, 1, 3),
            sample_seed(7, 1, 2, 4),
        ];
        assert!(others.iter().all(|&s| s != a));
    }

    #[test]
    fn runner_isolates_failures_and_bounds_concurrency() {
        let running = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let jobs: Vec<usize> = (0..24).collect();
        let mut got = BTreeMap::new();
        run_jobs(
            3,
            &jobs,
            |&j| {
                let now = running.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(5));
                running.fetch_sub(1, Ordering::SeqCst);
                match j {
                    5 => Err(Error::Undefined("five")),
                    7 => panic!("seven"),
                    _ => Ok(j * j),
                }
            },
            |&j, o| {
                got.insert(j, o.result);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(got.len(), 24);
        assert!(peak.load(Ordering::SeqCst) <= 3);
        assert_eq!(got[&4], Ok(16));
        assert!(got[&5].is_err());
        assert!(got[&7].as_ref().unwrap_err().contains("seven"));
    }

    #[test]
    fn atomic_write_and_corrupt_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.json");
        write_cell(&p, &vec![1.5f64, 0.1]).unwrap();
        assert_eq!(read_cell::<Vec<f64>>(&p), Some(vec![1.5, 0.1]));
        fs::write(&p, b"{trunc").unwrap();
        assert_eq!(read_cell::<Vec<f64>>(&p), None);
        assert_eq!(read_cell::<Vec<f64>>(&dir.path().join("missing.json")), None);
    }
}

//! Parameter sweeps over `(lambda, energy window)` grids.
//!
//! The classical and quantum sweeps are independent; each writes its own heatmap
//! CSVs, a `metrics.csv` in long form and a `manifest.json` into the output
//! directory, and can be resumed from the per-cell files it leaves there.

pub mod classical;
pub mod config;
pub mod export;
pub mod quantum;
pub mod store;

pub use classical::{run_classical_sweep, ClassicalCell, ClassicalOutput};
pub use config::{Caps, LambdaGrid, LambdaPreset, SweepConfig, REFERENCE_LAMBDAS};
pub use export::{export, ExportKind, Selector};
pub use quantum::{run_quantum_sweep, QuantumCell, QuantumOutput, WindowMetrics};
pub use store::{derive_seed, sample_seed, CellStatus, RunManifest};

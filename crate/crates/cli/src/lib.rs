//! Experiment harness around `hybrid_sched`: parameter sweeps driven by a
//! TOML config, single-schedule runs and offline audits of schedule files.

pub mod config;
pub mod single;
pub mod sweep;

pub use config::{Cell, ExperimentConfig, Grid};
pub use single::{read_demand, run_single, validate_files, SingleRun};
pub use sweep::{read_results, run_sweep, search_label, CellSummary, SweepReport, SweepRow};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HYBRID_SCHED_OUT_DIR";

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use hybrid_sched::{
    generate_demand, run_algorithm, summarize, validate, Algorithm, RunResult, SearchStrategy,
    SummaryStats, SystemParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Cell, ExperimentConfig};

/// One CSV row: the `RunResult` columns, then the cell coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub delta: f64,
    pub rp_ratio: f64,
    #[serde(rename = "T")]
    pub transmission_time: f64,
    #[serde(rename = "K")]
    pub configurations: usize,
    pub wall_time_ms: f64,
    pub cell: usize,
    pub n: usize,
    pub n_large: usize,
    pub n_small: usize,
    pub c_small: f64,
    pub search: String,
    pub valid: bool,
}

impl SweepRow {
    pub fn run_result(&self) -> RunResult {
        RunResult {
            algorithm: self.algorithm,
            seed: self.seed,
            delta: self.delta,
            rp_ratio: self.rp_ratio,
            transmission_time: self.transmission_time,
            configurations: self.configurations,
            wall_time_ms: self.wall_time_ms,
        }
    }
}

pub fn search_label(s: SearchStrategy) -> String {
    match s {
        SearchStrategy::FullScan => "full_scan".into(),
        SearchStrategy::BitonicBinary => "bitonic_binary".into(),
        SearchStrategy::Sampled { m } => format!("sampled:{m}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    #[serde(flatten)]
    pub params: Cell,
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub transmission_time: SummaryStats,
    #[serde(rename = "K")]
    pub configurations: SummaryStats,
    pub wall_time_ms: SummaryStats,
    pub invalid_runs: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<CellSummary>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

impl SweepReport {
    pub fn invalid_runs(&self) -> usize {
        self.rows.iter().filter(|r| !r.valid).count()
    }
}

fn run_one(cfg: &ExperimentConfig, index: usize, cell: &Cell, run: usize) -> Result<Vec<SweepRow>> {
    let seed = cfg.base_seed + run as u64;
    let demand = generate_demand(&cell.traffic(&cfg.traffic, cfg.n, seed))?;
    let params = SystemParams::from_ratio(cell.delta, cell.rate_ratio)?;
    let mut rows = Vec::with_capacity(cfg.algorithms.len());
    for &algorithm in &cfg.algorithms {
        let (outcome, elapsed) = run_algorithm(algorithm, &demand, &params, cell.search)?;
        let audit = validate(&demand, &params, outcome.plan(), Some(outcome.residual()));
        rows.push(SweepRow {
            algorithm,
            seed,
            delta: cell.delta,
            rp_ratio: cell.rate_ratio,
            transmission_time: outcome.transmission_time(),
            configurations: outcome.configurations(),
            wall_time_ms: if cfg.timing {
                elapsed.as_secs_f64() * 1e3
            } else {
                0.0
            },
            cell: index,
            n: cfg.n,
            n_large: cell.n_large,
            n_small: cell.n_small,
            c_small: cell.c_small,
            search: search_label(cell.search),
            valid: audit.is_clean(),
        });
    }
    Ok(rows)
}

fn summarize_cells(cfg: &ExperimentConfig, cells: &[Cell], rows: &[SweepRow]) -> Result<Vec<CellSummary>> {
    let mut out = Vec::new();
    for (index, cell) in cells.iter().enumerate() {
        for &algorithm in &cfg.algorithms {
            let picked: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.cell == index && r.algorithm == algorithm)
                .collect();
            let column = |f: fn(&SweepRow) -> f64| -> Vec<f64> { picked.iter().map(|r| f(r)).collect() };
            out.push(CellSummary {
                cell: index,
                params: *cell,
                algorithm,
                transmission_time: summarize(&column(|r| r.transmission_time))?,
                configurations: summarize(&column(|r| r.configurations as f64))?,
                wall_time_ms: summarize(&column(|r| r.wall_time_ms))?,
                invalid_runs: picked.iter().filter(|r| !r.valid).count(),
            });
        }
    }
    Ok(out)
}

/// Runs every (cell, run, algorithm) triple and writes `results.csv` and
/// `summary.json` into `out_dir`. Rows are ordered by cell, seed, then the
/// configured algorithm order, whatever order the workers finish in.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    let cells = cfg.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.runs).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))?;
    let batches: Vec<Vec<SweepRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, r)| run_one(cfg, c, &cells[c], r))
            .collect::<Result<_>>()
    })?;
    // `collect` keeps task order, which is already (cell, run).
    let rows: Vec<SweepRow> = batches.into_iter().flatten().collect();
    let summaries = summarize_cells(cfg, &cells, &rows)?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv_path = out_dir.join("results.csv");
    let mut writer = csv::Writer::from_path(&csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    for row in &rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summaries)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;

    Ok(SweepReport {
        rows,
        summaries,
        csv_path,
        summary_path,
    })
}

pub fn read_results(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

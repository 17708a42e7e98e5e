use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hybrid_sched::{Algorithm, SearchStrategy, TrafficGenConfig};
use serde::{Deserialize, Serialize};

/// Parameter grid; a sweep visits the cartesian product of all axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub delta: Vec<f64>,
    /// `r_c / r_p`.
    pub rate_ratio: Vec<f64>,
    /// `[n_large, n_small]` pairs.
    pub flows: Vec<[usize; 2]>,
    pub c_small: Vec<f64>,
    pub search: Vec<SearchStrategy>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            delta: vec![0.01],
            rate_ratio: vec![10.0],
            flows: vec![[4, 12]],
            c_small: vec![0.3],
            search: vec![SearchStrategy::BitonicBinary],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub n: usize,
    pub runs: usize,
    pub base_seed: u64,
    /// Directory receiving `results.csv` and `summary.json`.
    pub output: Option<PathBuf>,
    /// Record scheduler wall time; without it the column is zero and the
    /// CSV is byte-for-byte reproducible.
    pub timing: bool,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
    pub grid: Grid,
    /// Noise settings shared by every cell. Grid axes override its flow fields.
    pub traffic: TrafficGenConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: Algorithm::ALL.to_vec(),
            n: 100,
            runs: 100,
            base_seed: 0,
            output: None,
            timing: true,
            jobs: 0,
            grid: Grid::default(),
            traffic: TrafficGenConfig::default(),
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub delta: f64,
    pub rate_ratio: f64,
    pub n_large: usize,
    pub n_small: usize,
    pub c_small: f64,
    pub search: SearchStrategy,
}

impl Cell {
    pub fn traffic(&self, base: &TrafficGenConfig, n: usize, seed: u64) -> TrafficGenConfig {
        TrafficGenConfig {
            n,
            n_large: self.n_large,
            n_small: self.n_small,
            c_large: 1.0 - self.c_small,
            c_small: self.c_small,
            seed,
            ..base.clone()
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid experiment config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut cells = Vec::new();
        for &delta in &g.delta {
            for &rate_ratio in &g.rate_ratio {
                for &[n_large, n_small] in &g.flows {
                    for &c_small in &g.c_small {
                        for &search in &g.search {
                            cells.push(Cell {
                                delta,
                                rate_ratio,
                                n_large,
                                n_small,
                                c_small,
                                search,
                            });
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            bail!("no algorithms selected");
        }
        if self.runs == 0 {
            bail!("runs must be >= 1");
        }
        let cells = self.cells();
        if cells.is_empty() {
            bail!("the parameter grid is empty");
        }
        for cell in &cells {
            if !(cell.delta >= 0.0 && cell.delta.is_finite()) {
                bail!("delta {} must be finite and >= 0", cell.delta);
            }
            if !(cell.rate_ratio > 0.0 && cell.rate_ratio.is_finite()) {
                bail!("rate ratio {} must be finite and > 0", cell.rate_ratio);
            }
            cell.search.validate()?;
            cell.traffic(&self.traffic, self.n, 0)
                .validate()
                .with_context(|| format!("grid cell {cell:?}"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_document() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            algorithms = ["eclipse", "twohop"]
            n = 32
            runs = 5
            base_seed = 7
            [grid]
            delta = [0.01, 0.04]
            rate_ratio = [10, 20]
            flows = [[4, 12], [2, 6]]
            search = [{ mode = "full_scan" }, { mode = "sampled", m = 32 }]
            [traffic]
            enable_n2 = false
            "#,
        )
        .unwrap();
        assert_eq!(cfg.algorithms, vec![Algorithm::Eclipse, Algorithm::TwoHop]);
        assert_eq!(cfg.cells().len(), 16);
        assert_eq!(cfg.grid.c_small, vec![0.3]);
        assert!(!cfg.traffic.enable_n2 && cfg.traffic.enable_n1);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(ExperimentConfig::from_toml("runs = 0").unwrap().validate().is_err());
        assert!(ExperimentConfig::from_toml("[grid]\ndelta = []").unwrap().validate().is_err());
        assert!(ExperimentConfig::from_toml("n = 10").unwrap().validate().is_err());
        assert!(ExperimentConfig::from_toml("colour = 1").is_err());
        assert!(ExperimentConfig::from_toml("algorithms = [\"solstice\"]").is_err());
    }
}

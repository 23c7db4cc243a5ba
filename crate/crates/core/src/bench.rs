//! Manifests and the benchmark matrix.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus;
use crate::model::Model;
use crate::parallel::EngineConfig;
use crate::parser::{parse, ModelSource, ParseError};
use crate::report::{model_names, run_model, solution_line, Strategy};
use crate::search::{Mode, SolutionRecord};

fn default_s0() -> u32 {
    4
}

fn default_window_ms() -> u64 {
    10
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::First]
}

fn default_reps() -> usize {
    1
}

/// One engine run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub model_path: String,
    pub strategy: Strategy,
    pub mode: Mode,
    pub workers: usize,
    #[serde(rename = "threshold_S0", default = "default_s0")]
    pub threshold_s0: u32,
    #[serde(default = "default_window_ms")]
    pub imbalance_window_ms: u64,
    #[serde(default)]
    pub stats_csv_path: Option<PathBuf>,
    #[serde(default)]
    pub report_json_path: Option<PathBuf>,
}

/// A cross-product of models, modes, strategies and worker counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchManifest {
    /// File paths or names of bundled instances.
    pub models: Vec<String>,
    pub workers: Vec<usize>,
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(rename = "threshold_S0", default = "default_s0")]
    pub threshold_s0: u32,
    #[serde(default = "default_window_ms")]
    pub imbalance_window_ms: u64,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Manifest {
    Run(RunManifest),
    Bench(BenchManifest),
}

impl Manifest {
    pub fn from_json(text: &str) -> serde_json::Result<Manifest> {
        serde_json::from_str(text)
    }
}

pub fn engine_config(threshold_s0: u32, window_ms: u64) -> EngineConfig {
    EngineConfig {
        threshold_s0,
        imbalance_window: Duration::from_millis(window_ms),
    }
}

#[derive(Debug)]
pub enum LoadError {
    Io { path: String, source: io::Error },
    Parse(ParseError),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, source } => write!(f, "cannot read {path}: {source}"),
            LoadError::Parse(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for LoadError {}

/// Loads a model from a file, falling back to a bundled instance of that
/// name when no such file exists.
pub fn load_model(reference: &str) -> Result<(String, Model), LoadError> {
    let path = Path::new(reference);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| reference.to_string());
    if !path.exists() {
        if let Some(inst) = corpus::find(reference) {
            return inst.model().map(|m| (name, m)).map_err(LoadError::Parse);
        }
    }
    let src = ModelSource::from_file(path).map_err(|source| LoadError::Io {
        path: reference.to_string(),
        source,
    })?;
    parse(&src).map(|m| (name, m)).map_err(LoadError::Parse)
}

/// One cell of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub mode: Mode,
    pub strategy: Strategy,
    pub workers: usize,
    pub reps: usize,
    pub mean_wall_ns: u64,
    pub min_wall_ns: u64,
    pub max_wall_ns: u64,
    pub speedup: f64,
    pub mean_nodes: u64,
    pub solution_count: usize,
    /// Solution line of the first solution of the last repetition.
    pub solution: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Engine runs in the matrix, baselines excluded.
    pub runs: usize,
}

impl BenchReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminismViolation {
    pub model: String,
    pub mode: Mode,
    pub workers: usize,
    pub rep: usize,
    pub expected: Vec<SolutionRecord>,
    pub got: Vec<SolutionRecord>,
}

impl fmt::Display for DeterminismViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "determinism violation on {} (mode {}, {} workers, repetition {})",
            self.model,
            self.mode.as_str(),
            self.workers,
            self.rep
        )?;
        writeln!(f, "sequential: {}", serde_json::to_string(&self.expected).unwrap_or_default())?;
        write!(f, "spd:        {}", serde_json::to_string(&self.got).unwrap_or_default())
    }
}

impl std::error::Error for DeterminismViolation {}

/// Runs every (model, mode, strategy, workers) cell `reps` times. Every SPD
/// result is compared with the sequential one; the first mismatch aborts.
/// Sequential cells ignore the worker list and produce one row.
pub fn bench_matrix(
    models: &[(String, Model)],
    workers_list: &[usize],
    strategies: &[Strategy],
    modes: &[Mode],
    reps: usize,
    cfg: EngineConfig,
) -> Result<BenchReport, DeterminismViolation> {
    let reps = reps.max(1);
    let mut report = BenchReport::default();
    for (name, m) in models {
        let names = model_names(m);
        for &mode in modes {
            let mut baseline = Vec::new();
            let mut seq_total = 0u128;
            for _ in 0..reps {
                let r = run_model(m, Strategy::Seq, mode, 1, cfg);
                seq_total += r.wall.as_nanos();
                baseline = r.solutions;
            }
            let seq_mean = (seq_total / reps as u128) as u64;
            for &strategy in strategies {
                let worker_counts: &[usize] = if strategy == Strategy::Seq { &[1] } else { workers_list };
                for &workers in worker_counts {
                    let mut walls = Vec::with_capacity(reps);
                    let mut nodes = 0u64;
                    let mut last = Vec::new();
                    for rep in 0..reps {
                        let r = run_model(m, strategy, mode, workers, cfg);
                        report.runs += 1;
                        if strategy == Strategy::Spd && r.solutions != baseline {
                            return Err(DeterminismViolation {
                                model: name.clone(),
                                mode,
                                workers,
                                rep,
                                expected: baseline,
                                got: r.solutions,
                            });
                        }
                        walls.push(r.wall.as_nanos() as u64);
                        nodes += r.stats.iter().map(|s| s.nodes_expanded).sum::<u64>();
                        last = r.solutions;
                    }
                    let mean = walls.iter().sum::<u64>() / reps as u64;
                    report.rows.push(BenchRow {
                        model: name.clone(),
                        mode,
                        strategy,
                        workers,
                        reps,
                        mean_wall_ns: mean,
                        min_wall_ns: *walls.iter().min().unwrap_or(&0),
                        max_wall_ns: *walls.iter().max().unwrap_or(&0),
                        speedup: if mean > 0 { seq_mean as f64 / mean as f64 } else { 0.0 },
                        mean_nodes: nodes / reps as u64,
                        solution_count: last.len(),
                        solution: solution_line(&names, m.sense(), mode, last.first()),
                    });
                }
            }
        }
    }
    Ok(report)
}

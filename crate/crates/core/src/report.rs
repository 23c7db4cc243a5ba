//! Run reports, per-worker statistics CSV, and the one-line solution format.

use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{Model, Sense};
use crate::parallel::{solve_par_problem, EngineConfig, SplitRule, WorkerStats};
use crate::search::{solve_seq_problem, CpProblem, Mode, SearchProblem, SolutionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Seq,
    Spd,
    Spda,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Seq => "seq",
            Strategy::Spd => "spd",
            Strategy::Spda => "spda",
        }
    }

    pub fn split_rule(self) -> Option<SplitRule> {
        match self {
            Strategy::Seq => None,
            Strategy::Spd => Some(SplitRule::Spd),
            Strategy::Spda => Some(SplitRule::Spda),
        }
    }
}

/// Result of a single engine invocation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solutions: Vec<SolutionRecord>,
    pub stats: Vec<WorkerStats>,
    pub wall: Duration,
}

/// Runs one strategy on any problem. `Seq` ignores `workers` and reports a
/// single worker row.
pub fn run_problem<P: SearchProblem>(
    problem: &P,
    strategy: Strategy,
    mode: Mode,
    workers: usize,
    cfg: EngineConfig,
) -> RunOutcome {
    let start = Instant::now();
    match strategy.split_rule() {
        None => {
            let (solutions, s) = solve_seq_problem(problem, mode);
            let wall = start.elapsed();
            let stats = vec![WorkerStats {
                worker: 0,
                nodes_expanded: s.nodes_expanded,
                solutions_found: s.solutions_found,
                work_ns: wall.as_nanos() as u64,
                ..WorkerStats::default()
            }];
            RunOutcome { solutions, stats, wall }
        }
        Some(rule) => {
            let out = solve_par_problem(problem, workers, rule, mode, cfg);
            RunOutcome {
                solutions: out.solutions,
                stats: out.stats,
                wall: start.elapsed(),
            }
        }
    }
}

pub fn run_model(m: &Model, strategy: Strategy, mode: Mode, workers: usize, cfg: EngineConfig) -> RunOutcome {
    run_problem(&CpProblem::new(m), strategy, mode, workers, cfg)
}

/// `status;objective;name=value,...;path`, with `UNSAT;;;` when there is no
/// solution.
pub fn solution_line(names: &[String], sense: Sense, mode: Mode, rec: Option<&SolutionRecord>) -> String {
    let Some(rec) = rec else {
        return "UNSAT;;;".to_string();
    };
    let status = if mode == Mode::Optimize && sense != Sense::Satisfy {
        "OPTIMAL"
    } else {
        "SAT"
    };
    let objective = rec.objective.map(|o| o.to_string()).unwrap_or_default();
    let values = names
        .iter()
        .zip(&rec.assignment.values)
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(",");
    format!("{status};{objective};{values};{}", rec.path.to_bit_string())
}

pub fn model_names(m: &Model) -> Vec<String> {
    m.vars.iter().map(|v| v.name.clone()).collect()
}

/// Solution as it appears in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSolution {
    pub assignment: Vec<(String, i64)>,
    pub objective: Option<i64>,
    pub path: String,
}

impl ReportSolution {
    pub fn new(names: &[String], rec: &SolutionRecord) -> Self {
        ReportSolution {
            assignment: names.iter().cloned().zip(rec.assignment.values.iter().copied()).collect(),
            objective: rec.objective,
            path: rec.path.to_bit_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub mode: Mode,
    pub strategy: Strategy,
    pub workers: usize,
    /// First solution in path order; the only one outside All mode.
    pub solution: Option<ReportSolution>,
    pub solution_count: usize,
    pub wall_ns: u64,
    pub worker_stats: Vec<WorkerStats>,
    /// Sequential wall time divided by this run's, when a baseline exists.
    pub speedup: Option<f64>,
}

impl RunReport {
    pub fn new(model: &str, names: &[String], mode: Mode, strategy: Strategy, workers: usize, run: &RunOutcome) -> Self {
        RunReport {
            model: model.to_string(),
            mode,
            strategy,
            workers,
            solution: run.solutions.first().map(|r| ReportSolution::new(names, r)),
            solution_count: run.solutions.len(),
            wall_ns: run.wall.as_nanos() as u64,
            worker_stats: run.stats.clone(),
            speedup: None,
        }
    }

    pub fn with_baseline(mut self, seq_wall_ns: u64) -> Self {
        self.speedup = (self.wall_ns > 0).then(|| seq_wall_ns as f64 / self.wall_ns as f64);
        self
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}

/// CSV with header
/// `worker,nodes_expanded,nodes_replayed,splits_produced,bobnodes_consumed,solutions_found,work_ns,wait_ns`.
pub fn write_stats_csv<W: io::Write>(out: W, stats: &[WorkerStats]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if stats.is_empty() {
        w.write_record([
            "worker",
            "nodes_expanded",
            "nodes_replayed",
            "splits_produced",
            "bobnodes_consumed",
            "solutions_found",
            "work_ns",
            "wait_ns",
        ])?;
    }
    for s in stats {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stats_csv_file(path: impl AsRef<Path>, stats: &[WorkerStats]) -> csv::Result<()> {
    write_stats_csv(std::fs::File::create(path)?, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Assignment;
    use crate::path::PathId;

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        write_stats_csv(&mut buf, &[WorkerStats { worker: 1, nodes_expanded: 5, ..Default::default() }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "worker,nodes_expanded,nodes_replayed,splits_produced,bobnodes_consumed,solutions_found,work_ns,wait_ns"
        );
        assert_eq!(lines.next().unwrap(), "1,5,0,0,0,0,0,0");

        let mut empty = Vec::new();
        write_stats_csv(&mut empty, &[]).unwrap();
        assert!(String::from_utf8(empty).unwrap().starts_with("worker,nodes_expanded,"));
    }

    #[test]
    fn solution_lines() {
        let names = vec!["x".to_string(), "y".to_string()];
        let rec = SolutionRecord {
            assignment: Assignment::new(vec![0, 3]),
            objective: Some(0),
            path: PathId::parse_bit_string("0").unwrap(),
        };
        assert_eq!(solution_line(&names, Sense::Minimize, Mode::Optimize, Some(&rec)), "OPTIMAL;0;x=0,y=3;0");
        assert_eq!(solution_line(&names, Sense::Minimize, Mode::First, Some(&rec)), "SAT;0;x=0,y=3;0");
        assert_eq!(solution_line(&names, Sense::Satisfy, Mode::First, None), "UNSAT;;;");
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use detcp::bench::{bench_matrix, engine_config, load_model, LoadError, Manifest, RunManifest};
use detcp::model::Model;
use detcp::parallel::EngineConfig;
use detcp::report::{model_names, run_model, run_problem, solution_line, write_stats_csv_file, RunOutcome, RunReport, Strategy};
use detcp::search::{Mode, SearchProblem};
use detcp::synthetic::{gen_synthetic, Shape, SyntheticSpec};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "detcp", version, about = "Deterministic parallel depth-first constraint search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    First,
    All,
    Opt,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::First => Mode::First,
            ModeArg::All => Mode::All,
            ModeArg::Opt => Mode::Optimize,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Seq,
    Spd,
    Spda,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Seq => Strategy::Seq,
            StrategyArg::Spd => Strategy::Spd,
            StrategyArg::Spda => Strategy::Spda,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Best,
    Worst,
    Balanced,
}

#[derive(clap::Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "first")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "spd")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    workers: u64,
    /// Initial partitioning threshold.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=65536))]
    threshold: u32,
    #[arg(long, value_name = "PATH")]
    stats_csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    report_json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a .dfzn model (or a bundled instance by name).
    Solve {
        file: String,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Search a synthetic binary tree.
    Synth {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long)]
        depth: usize,
        /// Number of solution leaves for the balanced shape.
        #[arg(long, default_value_t = 1)]
        solutions: u64,
        /// Busy-loop iterations per expanded node.
        #[arg(long, default_value_t = 0)]
        node_cost: u32,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run a single-run or matrix manifest (JSON).
    Bench {
        #[arg(long)]
        manifest: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Input(String),
    Other(String),
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn with_env_window(mut cfg: EngineConfig) -> Result<EngineConfig, Failure> {
    if let Ok(v) = std::env::var("DETCP_IMBALANCE_MS") {
        let ms: u64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("DETCP_IMBALANCE_MS must be a number of milliseconds, got {v:?}")))?;
        cfg.imbalance_window = Duration::from_millis(ms);
    }
    Ok(cfg)
}

fn write_outputs(
    run: &RunOutcome,
    report: impl FnOnce() -> RunReport,
    stats_csv: Option<&Path>,
    report_json: Option<&Path>,
) -> Result<(), Failure> {
    if let Some(p) = stats_csv {
        write_stats_csv_file(p, &run.stats).map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?;
    }
    if let Some(p) = report_json {
        report()
            .write_json(p)
            .map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn print_solutions(names: &[String], m_sense: detcp::model::Sense, mode: Mode, run: &RunOutcome) {
    if run.solutions.is_empty() {
        println!("{}", solution_line(names, m_sense, mode, None));
    }
    for rec in &run.solutions {
        println!("{}", solution_line(names, m_sense, mode, Some(rec)));
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_model(
    name: &str,
    m: &Model,
    mode: Mode,
    strategy: Strategy,
    workers: usize,
    cfg: EngineConfig,
    stats_csv: Option<&Path>,
    report_json: Option<&Path>,
) -> Result<(), Failure> {
    let run = run_model(m, strategy, mode, workers, cfg);
    let names = model_names(m);
    print_solutions(&names, m.sense(), mode, &run);
    write_outputs(
        &run,
        || {
            let r = RunReport::new(name, &names, mode, strategy, workers, &run);
            let seq = run_model(m, Strategy::Seq, mode, 1, cfg);
            r.with_baseline(seq.wall.as_nanos() as u64)
        },
        stats_csv,
        report_json,
    )
}

fn run_manifest(r: &RunManifest) -> Result<(), Failure> {
    let (name, m) = load_model(&r.model_path)?;
    let cfg = with_env_window(engine_config(r.threshold_s0, r.imbalance_window_ms))?;
    solve_model(
        &name,
        &m,
        r.mode,
        r.strategy,
        r.workers.max(1),
        cfg,
        r.stats_csv_path.as_deref(),
        r.report_json_path.as_deref(),
    )
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { file, engine } => {
            let (name, m) = load_model(&file)?;
            let cfg = with_env_window(engine_config(engine.threshold, 10))?;
            solve_model(
                &name,
                &m,
                engine.mode.into(),
                engine.strategy.into(),
                engine.workers as usize,
                cfg,
                engine.stats_csv.as_deref(),
                engine.report_json.as_deref(),
            )
        }
        Command::Synth {
            shape,
            depth,
            solutions,
            node_cost,
            engine,
        } => {
            let spec = SyntheticSpec {
                depth,
                shape: match shape {
                    ShapeArg::Best => Shape::BestCase,
                    ShapeArg::Worst => Shape::WorstCase,
                    ShapeArg::Balanced => Shape::Balanced,
                },
                solution_count: solutions,
                work_per_node: node_cost,
            };
            let tree = gen_synthetic(spec).map_err(|e| Failure::Usage(e.to_string()))?;
            let cfg = with_env_window(engine_config(engine.threshold, 10))?;
            let (mode, strategy, workers) = (engine.mode.into(), engine.strategy.into(), engine.workers as usize);
            let run = run_problem(&tree, strategy, mode, workers, cfg);
            let names: Vec<String> = (0..depth).map(|i| format!("b{i}")).collect();
            print_solutions(&names, tree.sense(), mode, &run);
            let label = format!("synthetic-{}-{depth}", shape.to_possible_value().expect("named").get_name());
            write_outputs(
                &run,
                || {
                    let r = RunReport::new(&label, &names, mode, strategy, workers, &run);
                    let seq = run_problem(&tree, Strategy::Seq, mode, 1, cfg);
                    r.with_baseline(seq.wall.as_nanos() as u64)
                },
                engine.stats_csv.as_deref(),
                engine.report_json.as_deref(),
            )
        }
        Command::Bench { manifest } => {
            let text = std::fs::read_to_string(&manifest)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", manifest.display())))?;
            let parsed =
                Manifest::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", manifest.display())))?;
            match parsed {
                Manifest::Run(r) => run_manifest(&r),
                Manifest::Bench(b) => {
                    let models = b
                        .models
                        .iter()
                        .map(|m| load_model(m))
                        .collect::<Result<Vec<_>, _>>()?;
                    let cfg = with_env_window(engine_config(b.threshold_s0, b.imbalance_window_ms))?;
                    let report = bench_matrix(&models, &b.workers, &b.strategies, &b.modes, b.reps, cfg)
                        .map_err(|v| Failure::Other(v.to_string()))?;
                    let written = match &b.csv_path {
                        Some(p) => std::fs::File::create(p)
                            .map_err(csv::Error::from)
                            .and_then(|f| report.write_csv(f)),
                        None => report.write_csv(std::io::stdout()),
                    };
                    written.map_err(|e| Failure::Other(e.to_string()))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("detcp: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("detcp: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("detcp: {msg}");
            ExitCode::FAILURE
        }
    }
}

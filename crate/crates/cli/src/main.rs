//! `geomr`: plan, evaluate, compare and simulate MapReduce jobs over
//! geo-distributed platforms.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver limit reached (results
//! are still written), 3 file or output error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use geomr::makespan::timeline_csv;
use geomr::optimizer::{export_lp, ObjectiveKind, SolveOptions, SolveReport};
use geomr::plan::{load_plan, save_plan};
use geomr::platform::save_scenario;
use geomr::units::parse_data;
use geomr::{
    barrier_sweep, compare, conservation_violations, evaluate, load_scenario, make_environment,
    make_two_cluster_example, run_strategy, simulate, BarrierConfig, EnvironmentKind, OptimizerOptions, PiecewiseSpec,
    Scenario, SimConfig, Strategy,
};

#[derive(Parser)]
#[command(name = "geomr", version, about = "Execution plans for geo-distributed MapReduce")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the phase timeline and makespan of a plan.
    Evaluate {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "G-G-G")]
        barriers: BarrierConfig,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Compute a plan with one strategy and write it to a file.
    Plan {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        strategy: Strategy,
        #[arg(long, default_value = "G-G-G")]
        barriers: BarrierConfig,
        /// Plan file to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Compare strategies across expansion factors, normalized to uniform.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Strategies to run, repeatable or comma separated.
        #[arg(long = "strategy", value_delimiter = ',', default_values = ["uniform", "myopic", "e2e"])]
        strategies: Vec<Strategy>,
        /// Expansion factors, repeatable or comma separated.
        #[arg(long = "alpha", value_delimiter = ',', default_values = ["0.1", "1", "10"])]
        alphas: Vec<f64>,
        #[arg(long, default_value = "G-G-G")]
        barriers: BarrierConfig,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Optimized makespans with one or all boundaries relaxed to pipelining.
    BarrierSweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long = "alpha", value_delimiter = ',', default_values = ["0.1", "1", "10"])]
        alphas: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Run a plan in the discrete-event simulator.
    Simulate {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "G-G-G")]
        barriers: BarrierConfig,
        /// Piece size such as `64MB`; `0` runs the fluid engine.
        #[arg(long, default_value = "64MB")]
        chunk: String,
        /// Where to write the event trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Write a scenario file: a seeded environment (local-dc,
    /// intra-continental, global-4, global-8) or `two-cluster`.
    Generate {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the linearized program in LP format.
    ExportMip {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long, default_value = "G-G-G")]
        barriers: BarrierConfig,
        #[arg(long, value_enum, default_value_t = Objective::Makespan)]
        objective: Objective,
        #[arg(long, default_value_t = PiecewiseSpec::default().breakpoint_count)]
        breakpoints: usize,
        /// LP file to write; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's expansion factor.
    #[arg(long)]
    alpha: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let s = load_scenario(&self.scenario)?;
        with_alpha(s, self.alpha)
    }
}

fn with_alpha(s: Scenario, alpha: Option<f64>) -> Result<Scenario> {
    let Some(a) = alpha else {
        return Ok(s);
    };
    let s = s.with_alpha(a);
    s.workload.validate(s.platform.num_sources())?;
    Ok(s)
}

#[derive(Args)]
struct SolverArgs {
    /// Breakpoints per squared term of the linearization.
    #[arg(long, default_value_t = PiecewiseSpec::default().breakpoint_count)]
    breakpoints: usize,
    /// Relative optimality gap at which branch and bound stops.
    #[arg(long, default_value_t = SolveOptions::default().tol)]
    tol: f64,
    /// Wall-clock limit per program, in seconds. Results stay reproducible
    /// only while the node limit is the binding one.
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    /// Branch-and-bound nodes per program.
    #[arg(long, default_value_t = 500)]
    node_limit: usize,
    /// Seed of the direct-search refiner.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn options(&self) -> Result<OptimizerOptions> {
        if !(self.tol >= 0.0 && self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(geomr::Error::InvalidArgument(format!(
                "--tol must be >= 0 and --time-limit positive, got {} and {}",
                self.tol, self.time_limit
            ))
            .into());
        }
        let mut opts = OptimizerOptions {
            spec: PiecewiseSpec::new(self.breakpoints)?,
            solve: SolveOptions {
                tol: self.tol,
                time_limit: Duration::from_secs_f64(self.time_limit),
                node_limit: Some(self.node_limit),
            },
            ..OptimizerOptions::default()
        };
        opts.refine.seed = self.seed;
        Ok(opts)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    JsonLines,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Makespan,
    PushTime,
}

/// Whether a solver limit cut a search short.
type LimitReached = bool;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: a solver limit stopped the search early; results were still written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(g) = cause.downcast_ref::<geomr::Error>() {
            return match g {
                geomr::Error::Io { .. } => 3,
                geomr::Error::Solver(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return 3;
        }
    }
    1
}

fn run(command: Command) -> Result<LimitReached> {
    let mut out = std::io::stdout().lock();
    match command {
        Command::Evaluate {
            input,
            plan,
            barriers,
            format,
        } => {
            let s = input.load()?;
            let plan = load_plan(&plan, &s.platform)?;
            let t = evaluate(&s.platform, &s.workload, &plan, barriers)?;
            emit_csv(&mut out, &timeline_csv(&t, &s.platform), format)?;
            if let Format::Table = format {
                let b = t.phase_breakdown;
                writeln!(out, "makespan {} s (push {} + map {} + shuffle {} + reduce {})", t.makespan, b.push, b.map, b.shuffle, b.reduce)?;
            }
            Ok(false)
        }
        Command::Plan {
            input,
            strategy,
            barriers,
            out: path,
            solver,
            format,
        } => {
            let s = input.load()?;
            let opts = solver.options()?;
            let report = run_strategy(&s.platform, &s.workload, barriers, strategy, &opts)?;
            save_plan(&report.plan, &s.platform, &s.name, &path)?;
            log::info!("{} finished in {:?}", strategy, report.wall_time);
            emit(&mut out, &[PlanSummary::new(&s, &report)], format)?;
            Ok(report.limit_reached)
        }
        Command::Compare {
            scenario,
            strategies,
            alphas,
            barriers,
            solver,
            format,
        } => {
            let s = load_scenario(&scenario)?;
            let rows = compare(&s, &strategies, &alphas, barriers, &solver.options()?)?;
            emit(&mut out, &rows, format)?;
            Ok(rows.iter().any(|r| r.limit_reached))
        }
        Command::BarrierSweep {
            scenario,
            alphas,
            solver,
            format,
        } => {
            let s = load_scenario(&scenario)?;
            let rows = barrier_sweep(&s, &alphas, &solver.options()?)?;
            emit(&mut out, &rows, format)?;
            Ok(rows.iter().any(|r| r.limit_reached))
        }
        Command::Simulate {
            input,
            plan,
            barriers,
            chunk,
            trace,
            format,
        } => {
            let s = input.load()?;
            let plan = load_plan(&plan, &s.platform)?;
            let chunk_size = parse_data(&chunk).or_else(|e| match chunk.trim() {
                "0" => Ok(0.0),
                _ => Err(e),
            })?;
            let cfg = SimConfig::chunked(chunk_size, barriers);
            let sim = simulate(&s.platform, &s.workload, &plan, cfg)?;
            if let Some(path) = &trace {
                write_file(path, &sim.to_csv(&s.platform))?;
            }
            let predicted = evaluate(&s.platform, &s.workload, &plan, barriers)?.makespan;
            let violations = conservation_violations(&s.platform, &s.workload, &plan, &sim);
            let summary = SimSummary {
                scenario: s.name.clone(),
                barriers: barriers.to_string(),
                chunk_bytes: chunk_size,
                predicted,
                measured: sim.makespan(),
                relative_error: (sim.makespan() - predicted) / predicted,
                events: sim.events.len(),
                conservation_violations: violations.len(),
            };
            emit(&mut out, &[summary], format)?;
            if let Some(v) = violations.first() {
                anyhow::bail!("{} conservation violations, first: {v}", violations.len());
            }
            Ok(false)
        }
        Command::Generate {
            kind,
            seed,
            alpha,
            out: path,
        } => {
            let s = match kind.as_str() {
                "two-cluster" => make_two_cluster_example(),
                other => make_environment(other.parse::<EnvironmentKind>()?, seed),
            };
            let s = with_alpha(s, alpha)?;
            save_scenario(&s, &path)?;
            Ok(false)
        }
        Command::ExportMip {
            input,
            barriers,
            objective,
            breakpoints,
            out: path,
        } => {
            let s = input.load()?;
            let objective = match objective {
                Objective::Makespan => ObjectiveKind::Makespan,
                Objective::PushTime => ObjectiveKind::PushTime,
            };
            let text = export_lp(&s.platform, &s.workload, barriers, objective, &PiecewiseSpec::new(breakpoints)?)?;
            match path {
                Some(p) => write_file(&p, &text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(false)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct PlanSummary {
    scenario: String,
    strategy: String,
    barriers: String,
    alpha: f64,
    predicted_makespan: f64,
    mip_objective: Option<f64>,
    mip_plan_makespan: Option<f64>,
    error_bound: f64,
    eps_lin: f64,
    gap: f64,
    nodes: usize,
    limit_reached: bool,
    /// `name=seconds` pairs of multi-stage strategies, `;` separated.
    stages: String,
}

impl PlanSummary {
    fn new(s: &Scenario, r: &SolveReport) -> Self {
        Self {
            scenario: s.name.clone(),
            strategy: r.strategy.to_string(),
            barriers: r.barriers.to_string(),
            alpha: s.workload.alpha,
            predicted_makespan: r.predicted_makespan,
            mip_objective: r.mip_objective,
            mip_plan_makespan: r.mip_plan_makespan,
            error_bound: r.error_bound,
            eps_lin: r.eps_lin,
            gap: r.gap,
            nodes: r.node_count,
            limit_reached: r.limit_reached,
            stages: r
                .stages
                .iter()
                .map(|st| format!("{}={}", st.name, st.objective))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

#[derive(Serialize)]
struct SimSummary {
    scenario: String,
    barriers: String,
    chunk_bytes: f64,
    predicted: f64,
    measured: f64,
    relative_error: f64,
    events: usize,
    conservation_violations: usize,
}

/// Writes serializable rows in the requested format.
fn emit<T: Serialize>(out: &mut impl Write, rows: &[T], format: Format) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?;
    emit_csv(out, &text, format)
}

/// Re-renders CSV text (header first) as an aligned table or JSON lines.
fn emit_csv(out: &mut impl Write, csv_text: &str, format: Format) -> Result<()> {
    if let Format::Csv = format {
        out.write_all(csv_text.as_bytes())?;
        return Ok(());
    }
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    match format {
        Format::JsonLines => {
            for rec in &records {
                let obj: serde_json::Map<String, serde_json::Value> = header
                    .iter()
                    .zip(rec)
                    .map(|(k, v)| (k.clone(), json_value(v)))
                    .collect();
                writeln!(out, "{}", serde_json::Value::Object(obj))?;
            }
        }
        _ => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| records.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
                .collect();
            for line in std::iter::once(&header).chain(&records) {
                let cells: Vec<String> = line.iter().zip(&widths).map(|(v, &w)| format!("{v:<w$}")).collect();
                writeln!(out, "{}", cells.join("  ").trim_end())?;
            }
        }
    }
    Ok(())
}

fn json_value(v: &str) -> serde_json::Value {
    if v.is_empty() {
        return serde_json::Value::Null;
    }
    if let Ok(b) = v.parse::<bool>() {
        return b.into();
    }
    if let Ok(i) = v.parse::<i64>() {
        return i.into();
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => serde_json::Number::from_f64(x).map_or_else(|| v.into(), Into::into),
        _ => v.into(),
    }
}

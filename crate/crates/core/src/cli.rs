//! The `wincount` command line.
//!
//! One binary, five subcommands: `solve` (iterated window growth), `direct`
//! (full window in one shot), `oracle-check` (triple agreement on small
//! instances), `export-dot`, and `bench` (`generate` / `compare`).
//!
//! Exit codes follow the verdict for solving commands — 0 win, 1 lose,
//! 2 inconclusive — and sysexits-style codes for failures: 64 usage or bad
//! input, 70 internal, 74 I/O, 75 budget exhausted. The situation budget
//! comes from `--limit` or, when absent, the `SOLVER_MAX_SITUATIONS`
//! environment variable.
//!
//! All file outputs (strategy, stats, DOT, situation dumps, generated games)
//! are deterministic: same inputs, same bytes. Progress and timing go to
//! stderr only.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{compare, generate, BenchError, BenchSpec, CompareOptions, Family};
use crate::constraints::{ConstraintKind, ConstraintSet, CountingConstraint};
use crate::game::{parse_game, serialize_game, GameGraph};
use crate::oracle::{
    default_enumeration_depth, triple_check, OracleConfig, OracleError,
};
use crate::situation::{build, to_dot, dump_situations, SituationError};
use crate::solver::{
    find_winning_region, iterate_max, iterate_min, solve_direct, IterationStats, Progress,
    SolveReport, SolverError, Verdict, WinningStrategy,
};

#[derive(Parser)]
#[command(
    name = "wincount",
    version,
    about = "Solver for two-player games with window counting constraints",
    max_term_width = 100
)]
struct Cli {
    /// Suppress per-iteration progress on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve by growing one constraint's window until the verdict settles.
    Solve(SolveArgs),
    /// Solve at the full window lengths in one shot (baseline).
    Direct(DirectArgs),
    /// Cross-check the solver against both brute-force oracles.
    OracleCheck(OracleCheckArgs),
    /// Write a situation graph in GraphViz DOT format.
    ExportDot(ExportDotArgs),
    /// Generate benchmark games and compare solving procedures.
    #[command(subcommand)]
    Bench(BenchCommand),
}

/// Flags shared by everything that loads a game and constraints.
#[derive(Args)]
struct InstanceArgs {
    /// Game file (JSON).
    #[arg(long, value_name = "FILE")]
    game: PathBuf,
    /// Counting constraint as kind:action:bound:window, e.g. min:a:1:7.
    /// Repeat for several constraints.
    #[arg(long = "constraint", value_name = "SPEC", required = true)]
    constraints: Vec<String>,
}

/// Output flags shared by `solve` and `direct`.
#[derive(Args)]
struct OutputArgs {
    /// Write the winning strategy as JSON (only on a win).
    #[arg(long, value_name = "FILE")]
    strategy_out: Option<PathBuf>,
    /// Write per-iteration statistics as JSON.
    #[arg(long, value_name = "FILE")]
    stats_out: Option<PathBuf>,
    /// Write the final situation graph as DOT, winning region highlighted.
    #[arg(long, value_name = "FILE")]
    dot_out: Option<PathBuf>,
    /// Write the final situation list as text, one situation per line.
    #[arg(long, value_name = "FILE")]
    dump_situations: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Index of the constraint whose window the iteration grows.
    #[arg(long, value_name = "INDEX")]
    iterate_over: usize,
    /// Stop after this many iterations and report inconclusively
    /// (minimum constraints only).
    #[arg(long, value_name = "N")]
    max_iterations: Option<u32>,
    /// Abort with exit code 75 if any iteration exceeds this many situations.
    #[arg(long, value_name = "N")]
    limit: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DirectArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Abort with exit code 75 if the graph exceeds this many situations.
    #[arg(long, value_name = "N")]
    limit: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Ego-move depth for play enumeration (default: twice the longest
    /// window, plus four).
    #[arg(long, value_name = "N")]
    depth: Option<u32>,
}

#[derive(Args)]
struct ExportDotArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Skip solving; no winning-region highlight.
    #[arg(long)]
    plain: bool,
    /// Output file (default: stdout).
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Generate a seeded benchmark game and write it as JSON.
    Generate(GenerateArgs),
    /// Run iterated and direct solving on one instance and compare.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    /// Rover on a grid with sparse charger cells and seeded gusts.
    Grid,
    /// Random bipartite game graph.
    RandomBipartite,
    /// Chain of cycles with a known winning window length.
    CycleChain,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyKind,
    /// Grid width (grid family).
    #[arg(long, value_name = "N")]
    width: Option<u32>,
    /// Grid height (grid family).
    #[arg(long, value_name = "N")]
    height: Option<u32>,
    /// Number of charger cells (grid family; default: one per 32 cells).
    #[arg(long, value_name = "N")]
    chargers: Option<u32>,
    /// Number of states (random-bipartite family).
    #[arg(long, value_name = "N")]
    states: Option<u32>,
    /// Own actions per state (random-bipartite family).
    #[arg(long, value_name = "N")]
    branching: Option<u32>,
    /// Number of cycles (cycle-chain family).
    #[arg(long, value_name = "N")]
    cycles: Option<u32>,
    /// Ego/Alter pairs per cycle (cycle-chain family).
    #[arg(long, value_name = "N")]
    cycle_length: Option<u32>,
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Index of the constraint whose window the iteration grows.
    #[arg(long, value_name = "INDEX")]
    iterate_over: usize,
    /// Per-arm situation budget; an arm over budget fails softly.
    #[arg(long, value_name = "N")]
    limit: Option<u64>,
    /// Write the comparison report as JSON.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Skip the direct run at the constraint's full window length.
    #[arg(long)]
    skip_full_direct: bool,
    /// Time each arm this many times and report the median wall time.
    #[arg(long, value_name = "N", default_value_t = 1)]
    repeat: u32,
}

/// Everything a subcommand can fail with, tagged with its exit code.
#[derive(Debug)]
enum CliError {
    /// Bad flags, bad constraint specs, malformed or invalid game files.
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    /// A size budget ran out (exit 75, distinct from failure).
    Budget(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Budget(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Io { .. } => 74,
            CliError::Budget(_) => 75,
            CliError::Internal(_) => 70,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> CliError {
        if e.is_budget() {
            return CliError::Budget(e.to_string());
        }
        match e {
            SolverError::WrongKind { .. }
            | SolverError::Constraint(_)
            | SolverError::Situation(SituationError::BadConstraintIndex { .. }) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> CliError {
        match e {
            OracleError::Budget(msg) => CliError::Budget(msg),
            OracleError::Constraint(c) => CliError::Usage(c.to_string()),
            OracleError::Solver(s) => s.into(),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

/// Runs the CLI on the process arguments; returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Runs the CLI on explicit arguments — what the binary and the tests call.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return code;
        }
    };
    let quiet = cli.quiet;
    match dispatch(cli.command, quiet) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wincount: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, quiet: bool) -> Result<i32, CliError> {
    match command {
        Command::Solve(args) => cmd_solve(args, quiet),
        Command::Direct(args) => cmd_direct(args, quiet),
        Command::OracleCheck(args) => cmd_oracle_check(args),
        Command::ExportDot(args) => cmd_export_dot(args),
        Command::Bench(BenchCommand::Generate(args)) => cmd_bench_generate(args),
        Command::Bench(BenchCommand::Compare(args)) => cmd_bench_compare(args, quiet),
    }
}

// ---------------------------------------------------------------- loading

fn load_game(path: &Path) -> Result<GameGraph, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_game(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_constraint_spec(spec: &str, graph: &GameGraph) -> Result<CountingConstraint, CliError> {
    let bad = |why: &str| CliError::Usage(format!("constraint `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [kind, action, bound, window] = parts[..] else {
        return Err(bad("expected kind:action:bound:window, e.g. min:a:1:7"));
    };
    let kind = match kind {
        "min" => ConstraintKind::Min,
        "max" => ConstraintKind::Max,
        other => return Err(bad(&format!("unknown kind `{other}` (use min or max)"))),
    };
    let action = graph
        .find_action(action)
        .ok_or_else(|| bad(&format!("the game has no action `{action}`")))?;
    let bound: u32 = bound
        .parse()
        .map_err(|_| bad("bound must be a nonnegative integer"))?;
    let window: u32 = window
        .parse()
        .map_err(|_| bad("window must be a positive integer"))?;
    CountingConstraint::new(kind, action, bound, window).map_err(|e| bad(&e.to_string()))
}

fn load_instance(instance: &InstanceArgs) -> Result<(GameGraph, ConstraintSet), CliError> {
    let graph = load_game(&instance.game)?;
    let constraints = instance
        .constraints
        .iter()
        .map(|spec| parse_constraint_spec(spec, &graph))
        .collect::<Result<Vec<_>, _>>()?;
    let cs = ConstraintSet::new(&graph, constraints).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((graph, cs))
}

/// An explicit `--limit` wins; otherwise `SOLVER_MAX_SITUATIONS` applies.
fn resolve_limit(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("SOLVER_MAX_SITUATIONS") {
        Ok(value) => value.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!(
                "SOLVER_MAX_SITUATIONS must be an integer, got `{value}`"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => Err(CliError::Usage(
            "SOLVER_MAX_SITUATIONS is not valid UTF-8".into(),
        )),
    }
}

// ---------------------------------------------------------------- output

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file_or_stdout(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => write_file(path, content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct GameStats {
    states: usize,
    transitions: usize,
    max_fanout: usize,
}

#[derive(Serialize)]
struct IterationRecord {
    window: u32,
    situations: u64,
    transitions: u64,
    winnable_marked: u64,
    violating: u64,
    winning: u64,
    losing: u64,
}

/// Everything about a solve except wall-clock times, which would break
/// byte-for-byte reproducibility. Times go to stderr instead.
#[derive(Serialize)]
struct StatsDoc {
    mode: &'static str,
    verdict: Verdict,
    final_window: Option<u32>,
    game: GameStats,
    iterations: Vec<IterationRecord>,
}

fn stats_doc(mode: &'static str, graph: &GameGraph, report: &SolveReport) -> StatsDoc {
    StatsDoc {
        mode,
        verdict: report.verdict,
        final_window: report.final_window,
        game: GameStats {
            states: graph.state_count(),
            transitions: graph.transition_count(),
            max_fanout: graph.max_fanout(),
        },
        iterations: report
            .iterations
            .iter()
            .map(|i| IterationRecord {
                window: i.window,
                situations: i.situations,
                transitions: i.transitions,
                winnable_marked: i.winnable_marked,
                violating: i.violating,
                winning: i.winning,
                losing: i.losing,
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct StrategyEntry {
    state: String,
    histories: Vec<String>,
    action: String,
}

fn strategy_doc(graph: &GameGraph, ws: &WinningStrategy) -> Vec<StrategyEntry> {
    ws.strategy
        .entries()
        .map(|(id, action)| {
            let sit = ws.graph.situation(id);
            StrategyEntry {
                state: graph.state_name(sit.state).to_string(),
                histories: sit.histories.iter().map(|h| h.to_string()).collect(),
                action: graph.action_name(action).to_string(),
            }
        })
        .collect()
}

fn write_solve_outputs(
    mode: &'static str,
    graph: &GameGraph,
    report: &SolveReport,
    output: &OutputArgs,
) -> Result<(), CliError> {
    if let Some(path) = &output.stats_out {
        write_file(path, &pretty_json(&stats_doc(mode, graph, report)))?;
    }
    if let Some(path) = &output.strategy_out {
        match &report.strategy {
            Some(ws) => write_file(path, &pretty_json(&strategy_doc(graph, ws)))?,
            None => eprintln!(
                "wincount: no strategy to write (verdict: {:?})",
                report.verdict
            ),
        }
    }
    if let Some(path) = &output.dot_out {
        let (sg, region) = report
            .final_graph()
            .ok_or_else(|| CliError::Internal("solve produced no situation graph".into()))?;
        write_file(path, &to_dot(sg, graph, Some(region.mask())))?;
    }
    if let Some(path) = &output.dump_situations {
        let (sg, _) = report
            .final_graph()
            .ok_or_else(|| CliError::Internal("solve produced no situation graph".into()))?;
        write_file(path, &dump_situations(sg, graph))?;
    }
    Ok(())
}

fn progress_printer(quiet: bool) -> Option<impl FnMut(&IterationStats)> {
    if quiet {
        return None;
    }
    Some(|stats: &IterationStats| {
        eprintln!(
            "[window {}] situations={} transitions={} marked={} violating={} winning={} losing={} ({:.1?})",
            stats.window,
            stats.situations,
            stats.transitions,
            stats.winnable_marked,
            stats.violating,
            stats.winning,
            stats.losing,
            stats.wall
        );
    })
}

// ------------------------------------------------------------- commands

fn cmd_solve(args: SolveArgs, quiet: bool) -> Result<i32, CliError> {
    let (graph, cs) = load_instance(&args.instance)?;
    let index = args.iterate_over;
    if index >= cs.len() {
        return Err(CliError::Usage(format!(
            "--iterate-over {index} is out of range for {} constraint(s)",
            cs.len()
        )));
    }
    let kind = cs.get(index).kind;
    let limit = resolve_limit(args.limit)?;

    let mut printer = progress_printer(quiet);
    let progress: Progress<'_> = printer.as_mut().map(|p| p as _);
    let report = match kind {
        ConstraintKind::Min => iterate_min(&graph, &cs, index, args.max_iterations, limit, progress)?,
        ConstraintKind::Max => {
            if args.max_iterations.is_some() {
                return Err(CliError::Usage(
                    "--max-iterations only applies to minimum constraints; \
                     maximum constraints always run to the full window"
                        .into(),
                ));
            }
            iterate_max(&graph, &cs, index, limit, progress)?
        }
    };

    let mode = match kind {
        ConstraintKind::Min => "iterated-min",
        ConstraintKind::Max => "iterated-max",
    };
    write_solve_outputs(mode, &graph, &report, &args.output)?;
    if !quiet {
        eprintln!(
            "verdict: {:?} after {} iteration(s) in {:.1?}",
            report.verdict,
            report.iterations.len(),
            report.total_wall
        );
    }
    Ok(report.exit_code())
}

fn cmd_direct(args: DirectArgs, quiet: bool) -> Result<i32, CliError> {
    let (graph, cs) = load_instance(&args.instance)?;
    let limit = resolve_limit(args.limit)?;

    let mut printer = progress_printer(quiet);
    let progress: Progress<'_> = printer.as_mut().map(|p| p as _);
    let report = solve_direct(&graph, &cs, limit, progress)?;

    write_solve_outputs("direct", &graph, &report, &args.output)?;
    if !quiet {
        eprintln!(
            "verdict: {:?} in {:.1?}",
            report.verdict, report.total_wall
        );
    }
    Ok(report.exit_code())
}

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<i32, CliError> {
    let (graph, cs) = load_instance(&args.instance)?;
    let depth = args.depth.unwrap_or_else(|| default_enumeration_depth(&cs));
    let config = OracleConfig::default();
    let check = triple_check(&graph, &cs, depth, &config)?;

    let verdict = |win: bool| if win { "win" } else { "lose" };
    println!("solver:                  {}", verdict(check.solver_win));
    println!("fixpoint oracle:         {}", verdict(check.fixpoint_win));
    println!(
        "play enumeration (depth {}): {}",
        check.depth_used,
        verdict(check.enumeration_win)
    );
    if check.all_agree() {
        println!("agreement: yes");
        Ok(0)
    } else {
        println!("agreement: NO");
        Ok(1)
    }
}

fn cmd_export_dot(args: ExportDotArgs) -> Result<i32, CliError> {
    let (graph, cs) = load_instance(&args.instance)?;
    let limit = resolve_limit(None)?;
    let sg = build(&graph, &cs, None, limit).map_err(SolverError::from)?;
    let dot = if args.plain {
        to_dot(&sg, &graph, None)
    } else {
        let region = find_winning_region(&sg);
        to_dot(&sg, &graph, Some(region.mask()))
    };
    write_file_or_stdout(args.out.as_deref(), &dot)?;
    Ok(0)
}

fn cmd_bench_generate(args: GenerateArgs) -> Result<i32, CliError> {
    let family = resolve_family(&args)?;
    let spec = BenchSpec {
        family,
        seed: args.seed,
    };
    let graph = generate(&spec)?;
    write_file_or_stdout(args.out.as_deref(), &serialize_game(&graph))?;
    Ok(0)
}

fn resolve_family(args: &GenerateArgs) -> Result<Family, CliError> {
    fn need(name: &str, value: Option<u32>, family: &str) -> Result<u32, CliError> {
        value.ok_or_else(|| CliError::Usage(format!("--{name} is required for --family {family}")))
    }
    Ok(match args.family {
        FamilyKind::Grid => {
            let width = need("width", args.width, "grid")?;
            let height = need("height", args.height, "grid")?;
            Family::Grid {
                width,
                height,
                chargers: args.chargers.unwrap_or_else(|| (width * height / 32).max(1)),
            }
        }
        FamilyKind::RandomBipartite => Family::RandomBipartite {
            states: need("states", args.states, "random-bipartite")?,
            branching: need("branching", args.branching, "random-bipartite")?,
        },
        FamilyKind::CycleChain => Family::CycleChain {
            cycles: need("cycles", args.cycles, "cycle-chain")?,
            cycle_length: need("cycle-length", args.cycle_length, "cycle-chain")?,
        },
    })
}

fn cmd_bench_compare(args: CompareArgs, quiet: bool) -> Result<i32, CliError> {
    let (graph, cs) = load_instance(&args.instance)?;
    let limit = resolve_limit(args.limit)?;
    let options = CompareOptions {
        limit,
        run_full_direct: !args.skip_full_direct,
        repeat: args.repeat.max(1),
    };

    let mut printer = progress_printer(quiet);
    let progress: Progress<'_> = printer.as_mut().map(|p| p as _);
    let report = compare(&graph, &cs, args.iterate_over, &options, progress)?;

    for arm in &report.arms {
        match (&arm.verdict, &arm.error) {
            (Some(verdict), _) => eprintln!(
                "{}: {:?} (peak {} situations, {} iteration(s), {} ms)",
                arm.label, verdict, arm.peak_situations, arm.iterations, arm.wall_ms
            ),
            (None, Some(error)) => eprintln!("{}: failed: {error}", arm.label),
            (None, None) => {}
        }
    }

    if let Some(path) = &args.report {
        write_file(path, &pretty_json(&report))?;
    }

    if report.arms.iter().all(|a| a.error.is_some()) {
        return Err(CliError::Budget(
            "every comparison arm exceeded its budget".into(),
        ));
    }
    if !report.verdicts_agree {
        eprintln!("wincount: verdict mismatch between arms — correctness failure");
        return Ok(70);
    }
    Ok(0)
}

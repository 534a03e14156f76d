//! Generated game families and a comparison harness.
//!
//! Three seeded families cover the shapes the solver cares about: a grid
//! world with sparse recharge cells ([`Family::Grid`]), unstructured random
//! bipartite graphs ([`Family::RandomBipartite`]), and chained cycles with a
//! known winning window length ([`Family::CycleChain`]). Every generated
//! graph passes validation by construction.
//!
//! [`compare`] runs the iterated procedure and the direct construction on
//! one instance and reports per-arm sizes and verdicts, which is how the
//! pruning payoff is measured.

use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ConstraintKind, ConstraintSet};
use crate::game::{GameGraph, GameFileError, Player};
use crate::solver::{
    iterate_max, iterate_min, reborrow_progress, solve_direct, Progress, SolveReport, SolverError,
    Verdict,
};

/// A parameterized game family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Rover on a `width` x `height` grid. Ego picks a direction or charges
    /// (only on one of `chargers` seeded charger cells); Alter then either
    /// stays calm or gusts the rover to a seeded neighbor cell.
    Grid {
        width: u32,
        height: u32,
        chargers: u32,
    },
    /// Random bipartite graph on `states` states alternating by parity, with
    /// `branching` distinct-action successors per state.
    RandomBipartite { states: u32, branching: u32 },
    /// `cycles` cycles of `cycle_length` Ego/Alter pairs each, joined in a
    /// chain. The action `act` is only available on each cycle's entry
    /// state, so a minimum constraint on `act` needs a window of at least
    /// `cycle_length` Ego moves.
    CycleChain { cycles: u32, cycle_length: u32 },
}

/// A family plus the seed that pins all its random choices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad family parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Game(#[from] GameFileError),
}

/// Generates the game graph for a spec. Identical specs yield identical
/// graphs, byte for byte after serialization.
pub fn generate(spec: &BenchSpec) -> Result<GameGraph, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.family {
        Family::Grid {
            width,
            height,
            chargers,
        } => generate_grid(width, height, chargers, &mut rng),
        Family::RandomBipartite { states, branching } => {
            generate_bipartite(states, branching, &mut rng)
        }
        Family::CycleChain {
            cycles,
            cycle_length,
        } => generate_cycle_chain(cycles, cycle_length),
    }
}

fn generate_grid(
    width: u32,
    height: u32,
    chargers: u32,
    rng: &mut ChaCha8Rng,
) -> Result<GameGraph, BenchError> {
    let cells = (width as u64) * (height as u64);
    if cells < 2 {
        return Err(BenchError::BadParameters(
            "grid needs at least two cells".into(),
        ));
    }
    if chargers == 0 || chargers as u64 > cells {
        return Err(BenchError::BadParameters(format!(
            "chargers must be between 1 and {cells}"
        )));
    }

    // Seed charger cells by sampling without replacement, initial cell first
    // so a strategy can charge before ever moving.
    let mut charger_at = vec![false; cells as usize];
    charger_at[0] = true;
    let mut placed = 1;
    while placed < chargers {
        let cell = rng.random_range(0..cells) as usize;
        if !charger_at[cell] {
            charger_at[cell] = true;
            placed += 1;
        }
    }

    let cell_index = |x: u32, y: u32| (y as u64 * width as u64 + x as u64) as usize;
    let ego_name = |x: u32, y: u32| format!("e_{x}_{y}");
    let alter_name = |x: u32, y: u32| format!("w_{x}_{y}");

    let mut states = Vec::with_capacity(2 * cells as usize);
    let mut transitions = Vec::new();
    for y in 0..height {
        for x in 0..width {
            states.push((ego_name(x, y), Player::Ego));
            states.push((alter_name(x, y), Player::Alter));

            // Ego: move within bounds, or charge in place on charger cells.
            let mut moves: Vec<(&str, u32, u32)> = Vec::with_capacity(5);
            if x + 1 < width {
                moves.push(("east", x + 1, y));
            }
            if y + 1 < height {
                moves.push(("north", x, y + 1));
            }
            if y > 0 {
                moves.push(("south", x, y - 1));
            }
            if x > 0 {
                moves.push(("west", x - 1, y));
            }
            if charger_at[cell_index(x, y)] {
                moves.push(("charge", x, y));
            }
            for (action, tx, ty) in moves {
                transitions.push((ego_name(x, y), action.to_string(), alter_name(tx, ty)));
            }

            // Alter: calm keeps the rover put; on windy cells a gust shoves
            // it to one seeded in-bounds neighbor, elsewhere gust is calm.
            transitions.push((alter_name(x, y), "calm".to_string(), ego_name(x, y)));
            let windy = rng.random_range(0..4u8) == 0;
            let (gx, gy) = if windy {
                let mut neighbors: Vec<(u32, u32)> = Vec::with_capacity(4);
                if x + 1 < width {
                    neighbors.push((x + 1, y));
                }
                if y + 1 < height {
                    neighbors.push((x, y + 1));
                }
                if y > 0 {
                    neighbors.push((x, y - 1));
                }
                if x > 0 {
                    neighbors.push((x - 1, y));
                }
                *neighbors.choose(rng).expect("grid has at least two cells")
            } else {
                (x, y)
            };
            transitions.push((alter_name(x, y), "gust".to_string(), ego_name(gx, gy)));
        }
    }

    assemble(
        states,
        "e_0_0",
        &["charge", "east", "north", "south", "west"],
        &["calm", "gust"],
        transitions,
    )
}

fn generate_bipartite(
    states: u32,
    branching: u32,
    rng: &mut ChaCha8Rng,
) -> Result<GameGraph, BenchError> {
    if states < 2 {
        return Err(BenchError::BadParameters(
            "random bipartite games need at least two states".into(),
        ));
    }
    if branching == 0 || branching > 99 {
        return Err(BenchError::BadParameters(
            "branching must be between 1 and 99".into(),
        ));
    }

    // Even-index states are Ego's, odd-index Alter's. The Ego alphabet has a
    // distinguished action "a" (the one constraints usually count) plus
    // anonymous fillers; each state offers `branching` distinct own actions.
    let mut ego_actions = vec!["a".to_string()];
    for i in 1..=branching {
        ego_actions.push(format!("e{i:02}"));
    }
    let alter_actions: Vec<String> = (0..branching).map(|i| format!("x{i:02}")).collect();

    let names: Vec<(String, Player)> = (0..states)
        .map(|i| {
            let owner = if i % 2 == 0 { Player::Ego } else { Player::Alter };
            (format!("s{i}"), owner)
        })
        .collect();

    let mut transitions = Vec::new();
    for i in 0..states {
        let own = if i % 2 == 0 { &ego_actions } else { &alter_actions };
        let mut pool: Vec<&String> = own.iter().collect();
        let mut chosen = Vec::with_capacity(branching as usize);
        for _ in 0..branching.min(pool.len() as u32) {
            let at = rng.random_range(0..pool.len());
            chosen.push(pool.swap_remove(at).clone());
        }
        // Any opposite-parity target keeps the graph bipartite.
        let targets: Vec<u32> = (0..states).filter(|j| j % 2 != i % 2).collect();
        for action in chosen {
            let target = targets[rng.random_range(0..targets.len())];
            transitions.push((format!("s{i}"), action, format!("s{target}")));
        }
    }

    let ego_refs: Vec<&str> = ego_actions.iter().map(String::as_str).collect();
    let alter_refs: Vec<&str> = alter_actions.iter().map(String::as_str).collect();
    assemble(names, "s0", &ego_refs, &alter_refs, transitions)
}

fn generate_cycle_chain(cycles: u32, cycle_length: u32) -> Result<GameGraph, BenchError> {
    if cycles == 0 || cycle_length == 0 {
        return Err(BenchError::BadParameters(
            "cycle chain needs at least one cycle of length one".into(),
        ));
    }

    let ego_name = |c: u32, j: u32| format!("c{c}_e{j}");
    let alter_name = |c: u32, j: u32| format!("c{c}_w{j}");

    let mut states = Vec::new();
    let mut transitions = Vec::new();
    for c in 0..cycles {
        for j in 0..cycle_length {
            states.push((ego_name(c, j), Player::Ego));
            states.push((alter_name(c, j), Player::Alter));

            // Every Ego state can step; only the cycle entry can also act.
            transitions.push((ego_name(c, j), "step".to_string(), alter_name(c, j)));
            if j == 0 {
                transitions.push((ego_name(c, j), "act".to_string(), alter_name(c, j)));
            }

            // Alter ticks around the cycle; from the last pair it can also
            // jump the play into the next cycle.
            let next = (j + 1) % cycle_length;
            transitions.push((alter_name(c, j), "tick".to_string(), ego_name(c, next)));
            if j == cycle_length - 1 && c + 1 < cycles {
                transitions.push((alter_name(c, j), "jump".to_string(), ego_name(c + 1, 0)));
            }
        }
    }

    assemble(states, "c0_e0", &["act", "step"], &["jump", "tick"], transitions)
}

fn assemble(
    states: Vec<(String, Player)>,
    initial: &str,
    ego_actions: &[&str],
    alter_actions: &[&str],
    transitions: Vec<(String, String, String)>,
) -> Result<GameGraph, BenchError> {
    Ok(GameGraph::new(
        states,
        initial,
        ego_actions.iter().map(|s| s.to_string()).collect(),
        alter_actions.iter().map(|s| s.to_string()).collect(),
        transitions,
    )?)
}

/// What [`compare`] should run besides the iterated procedure.
#[derive(Debug, Clone, Copy)]
pub struct CompareOptions {
    /// Situation cap per arm; exceeding it fails that arm, not the run.
    pub limit: Option<u64>,
    /// Also run the direct construction at the full window, not only at the
    /// window the iterated procedure stopped at.
    pub run_full_direct: bool,
    /// How many times to time each arm; the reported `wall_ms` is the
    /// median. Counts and verdicts always come from the first run.
    pub repeat: u32,
}

impl Default for CompareOptions {
    fn default() -> CompareOptions {
        CompareOptions {
            limit: None,
            run_full_direct: true,
            repeat: 1,
        }
    }
}

/// One solving run inside a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    pub label: String,
    /// Missing when the arm failed (see `error`).
    pub verdict: Option<Verdict>,
    pub final_window: Option<u32>,
    pub peak_situations: u64,
    pub total_situations: u64,
    pub winnable_marked: u64,
    pub iterations: usize,
    /// Median over the repeated runs.
    pub wall_ms: u64,
    /// Wall time of every run, sorted ascending.
    pub wall_ms_runs: Vec<u64>,
    pub error: Option<String>,
}

impl ArmReport {
    fn from_report(label: &str, report: &SolveReport) -> ArmReport {
        let wall_ms = report.total_wall.as_millis() as u64;
        ArmReport {
            label: label.to_string(),
            verdict: Some(report.verdict),
            final_window: report.final_window,
            peak_situations: report.peak_situations(),
            total_situations: report.total_situations(),
            winnable_marked: report.iterations.iter().map(|i| i.winnable_marked).sum(),
            iterations: report.iterations.len(),
            wall_ms,
            wall_ms_runs: vec![wall_ms],
            error: None,
        }
    }

    fn failed(label: &str, error: &SolverError) -> ArmReport {
        ArmReport {
            label: label.to_string(),
            verdict: None,
            final_window: None,
            peak_situations: 0,
            total_situations: 0,
            winnable_marked: 0,
            iterations: 0,
            wall_ms: 0,
            wall_ms_runs: Vec::new(),
            error: Some(error.to_string()),
        }
    }
}

/// Iterated procedure versus direct construction on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub arms: Vec<ArmReport>,
    /// Whether every arm that produced a verdict produced the same one.
    pub verdicts_agree: bool,
    /// Whether the iterated arm's peak graph stayed strictly smaller than
    /// the direct construction at the same final window. Missing unless both
    /// arms finished.
    pub iterated_peak_below_direct: Option<bool>,
}

/// Runs the iterated procedure on `iterated_index`, the direct construction
/// at the window the iterated procedure stopped at, and (optionally) at the
/// constraint's full window.
pub fn compare(
    graph: &GameGraph,
    cs: &ConstraintSet,
    iterated_index: usize,
    options: &CompareOptions,
    mut progress: Progress<'_>,
) -> Result<ComparisonReport, SolverError> {
    if iterated_index >= cs.len() {
        return Err(SolverError::Situation(
            crate::situation::SituationError::BadConstraintIndex {
                index: iterated_index,
                count: cs.len(),
            },
        ));
    }
    let kind = cs.get(iterated_index).kind;
    let full_window = cs.get(iterated_index).window;

    let mut arms = Vec::new();

    let iterated = run_arm(
        &mut arms,
        "iterated",
        options.repeat,
        reborrow_progress(&mut progress),
        |p| match kind {
            ConstraintKind::Min => iterate_min(graph, cs, iterated_index, None, options.limit, p),
            ConstraintKind::Max => iterate_max(graph, cs, iterated_index, options.limit, p),
        },
    )?;

    // On a Win the direct baseline is rerun at the window the iteration
    // stopped at; on Lose or Inconclusive there is no distinguished stopping
    // window (the iteration ran out), so only the full-window arm applies.
    let stopped_window = iterated.and_then(|r| r.final_window);
    if let Some(window) = stopped_window {
        let at_stop = cs.with_window(iterated_index, window);
        run_arm(
            &mut arms,
            "direct-at-final-window",
            options.repeat,
            reborrow_progress(&mut progress),
            |p| solve_direct(graph, &at_stop, options.limit, p),
        )?;
        if options.run_full_direct && window != full_window {
            run_arm(
                &mut arms,
                "direct-at-full-window",
                options.repeat,
                reborrow_progress(&mut progress),
                |p| solve_direct(graph, cs, options.limit, p),
            )?;
        }
    } else if options.run_full_direct {
        run_arm(
            &mut arms,
            "direct-at-full-window",
            options.repeat,
            reborrow_progress(&mut progress),
            |p| solve_direct(graph, cs, options.limit, p),
        )?;
    }

    let verdicts: Vec<Verdict> = arms.iter().filter_map(|a| a.verdict).collect();
    let verdicts_agree = verdicts.windows(2).all(|w| w[0] == w[1]);
    let iterated_peak_below_direct = match (arms.first(), arms.get(1)) {
        (Some(it), Some(direct)) if it.error.is_none() && direct.error.is_none() => {
            Some(it.peak_situations < direct.peak_situations)
        }
        _ => None,
    };

    Ok(ComparisonReport {
        arms,
        verdicts_agree,
        iterated_peak_below_direct,
    })
}

/// Solves one arm, timing it `repeat` times. The first run feeds the
/// progress callback and supplies all counts; reruns only contribute wall
/// times. A budget failure is recorded in the arm, not returned.
fn run_arm<F>(
    arms: &mut Vec<ArmReport>,
    label: &str,
    repeat: u32,
    mut progress: Progress<'_>,
    mut solve: F,
) -> Result<Option<SolveReport>, SolverError>
where
    F: FnMut(Progress<'_>) -> Result<SolveReport, SolverError>,
{
    let first = match solve(reborrow_progress(&mut progress)) {
        Ok(report) => report,
        Err(e) if e.is_budget() => {
            arms.push(ArmReport::failed(label, &e));
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let mut walls = vec![first.total_wall.as_millis() as u64];
    for _ in 1..repeat.max(1) {
        walls.push(solve(None)?.total_wall.as_millis() as u64);
    }
    walls.sort_unstable();
    let mut arm = ArmReport::from_report(label, &first);
    arm.wall_ms = walls[walls.len() / 2];
    arm.wall_ms_runs = walls;
    arms.push(arm);
    Ok(Some(first))
}

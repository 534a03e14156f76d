//! Brute-force reference implementations for cross-checking the solver.
//!
//! Three independent computations of the same answers, each written directly
//! from the definitions rather than sharing the solver's machinery:
//!
//! * [`oracle_situation_graph`] — naive product construction that expands
//!   *every* reachable situation, including successors of violating ones;
//! * [`oracle_winning`] — textbook safety fixpoint by repeated full scans
//!   over that graph (no counters, no worklist);
//! * [`oracle_play_enumeration`] — depth-bounded minimax over actual play
//!   prefixes, judging each prefix with play-level satisfaction.
//!
//! All three are exponential-friendly only at toy scale; [`OracleConfig`]
//! budgets refuse anything larger. [`triple_check`] runs solver and oracles
//! side by side and retries enumeration once at doubled depth when it is the
//! odd one out (bounded lookahead can miss slow forced losses).

use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::constraints::{play_satisfies, ConstraintError, ConstraintSet};
use crate::game::{ActionId, GameGraph, PlayPrefix, Player, StateId};
use crate::situation::{Situation, SituationGraph, SituationId};
use crate::solver::{solve_direct, SolverError, Verdict};

/// Size budgets for the brute-force paths.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub max_states: usize,
    pub max_window: u32,
    pub max_depth: u32,
}

impl Default for OracleConfig {
    fn default() -> OracleConfig {
        OracleConfig {
            max_states: 12,
            max_window: 6,
            max_depth: 64,
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn check_budget(
    graph: &GameGraph,
    cs: &ConstraintSet,
    config: &OracleConfig,
) -> Result<(), OracleError> {
    if graph.state_count() > config.max_states {
        return Err(OracleError::Budget(format!(
            "{} states, oracle limit {}",
            graph.state_count(),
            config.max_states
        )));
    }
    if let Some(w) = cs.iter().map(|c| c.window).find(|&w| w > config.max_window) {
        return Err(OracleError::Budget(format!(
            "window {w}, oracle limit {}",
            config.max_window
        )));
    }
    Ok(())
}

/// The full reachable product, kept in the oracle's own plain representation
/// so the winning fixpoint below shares no traversal code with the solver.
struct Product {
    situations: Vec<Situation>,
    /// Outgoing `(action, target)` edges per situation.
    successors: Vec<Vec<(ActionId, u32)>>,
    violating: Vec<bool>,
}

/// Expands *every* reachable situation, including successors of violating
/// ones, so the product is closed under successors.
fn explore(
    graph: &GameGraph,
    cs: &ConstraintSet,
    config: &OracleConfig,
) -> Result<Product, OracleError> {
    check_budget(graph, cs, config)?;

    let root = Situation {
        state: graph.initial(),
        histories: cs.initial_histories(),
    };
    let mut situations = vec![root.clone()];
    let mut index: FxHashMap<Situation, u32> = FxHashMap::default();
    index.insert(root, 0);
    let mut successors: Vec<Vec<(ActionId, u32)>> = vec![Vec::new()];
    let mut stack = vec![0u32];

    while let Some(cur) = stack.pop() {
        let state = situations[cur as usize].state;
        let histories = situations[cur as usize].histories.clone();
        for &(action, dst) in graph.successors(state).expect("state from this graph") {
            let next = Situation {
                state: dst,
                histories: match graph.owner(state) {
                    Player::Ego => histories
                        .iter()
                        .zip(cs.iter())
                        .map(|(h, c)| h.shifted(c.classify(action)))
                        .collect(),
                    Player::Alter => histories.clone(),
                },
            };
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = situations.len() as u32;
                    index.insert(next.clone(), id);
                    situations.push(next);
                    successors.push(Vec::new());
                    stack.push(id);
                    id
                }
            };
            successors[cur as usize].push((action, id));
        }
    }

    let violating = situations
        .iter()
        .map(|s| {
            s.histories
                .iter()
                .zip(cs.iter())
                .any(|(h, c)| !c.holds(h))
        })
        .collect();

    Ok(Product {
        situations,
        successors,
        violating,
    })
}

/// Builds the full reachable product of game states and histories, with no
/// cutoff at violating situations: these are classified in the result but
/// still expanded.
pub fn oracle_situation_graph(
    graph: &GameGraph,
    cs: &ConstraintSet,
    config: &OracleConfig,
) -> Result<SituationGraph, OracleError> {
    let product = explore(graph, cs, config)?;
    let edges: Vec<(u32, ActionId, u32)> = product
        .successors
        .iter()
        .enumerate()
        .flat_map(|(src, succs)| succs.iter().map(move |&(a, dst)| (src as u32, a, dst)))
        .collect();
    let violating: Vec<SituationId> = product
        .violating
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v)
        .map(|(i, _)| SituationId(i as u32))
        .collect();
    Ok(SituationGraph::from_parts(
        graph,
        product.situations,
        &edges,
        violating,
        Vec::new(),
    ))
}

/// Computes the winning situations of the full product by the textbook
/// fixpoint: start from the violating set and repeatedly scan, marking an
/// Alter situation losing when some successor is and an Ego situation when
/// all are, until nothing changes. Returns winning situations by value.
pub fn oracle_winning(
    graph: &GameGraph,
    cs: &ConstraintSet,
    config: &OracleConfig,
) -> Result<Vec<Situation>, OracleError> {
    let product = explore(graph, cs, config)?;
    let mut losing = product.violating.clone();

    loop {
        let mut changed = false;
        for (id, succs) in product.successors.iter().enumerate() {
            if losing[id] {
                continue;
            }
            let now_losing = match graph.owner(product.situations[id].state) {
                Player::Alter => succs.iter().any(|&(_, d)| losing[d as usize]),
                Player::Ego => succs.iter().all(|&(_, d)| losing[d as usize]),
            };
            if now_losing {
                losing[id] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Ok(product
        .situations
        .into_iter()
        .zip(losing)
        .filter(|&(_, l)| !l)
        .map(|(s, _)| s)
        .collect())
}

/// Whether Ego can survive `depth` own moves from the initial state against
/// every Alter behavior, judged by replaying actual prefixes through
/// [`play_satisfies`]. Memoized on what the future can depend on: the current
/// state, the recent Ego moves (up to the longest window minus one), how many
/// Ego moves were made (capped at the longest window, to decide window
/// completeness), and the remaining depth.
pub fn oracle_play_enumeration(
    graph: &GameGraph,
    cs: &ConstraintSet,
    depth: u32,
    config: &OracleConfig,
) -> Result<bool, OracleError> {
    check_budget(graph, cs, config)?;
    if depth > config.max_depth {
        return Err(OracleError::Budget(format!(
            "depth {depth}, oracle limit {}",
            config.max_depth
        )));
    }

    type Suffix = SmallVec<[ActionId; 8]>;
    type Memo = FxHashMap<(StateId, Suffix, u32, u32), bool>;

    let max_window = cs.iter().map(|c| c.window).max().unwrap_or(1);

    fn recent_ego_moves(graph: &GameGraph, prefix: &PlayPrefix, keep: usize) -> Suffix {
        let mut moves: Suffix = prefix
            .states()
            .iter()
            .zip(prefix.actions())
            .filter(|&(&s, _)| graph.owner(s) == Player::Ego)
            .map(|(_, &a)| a)
            .collect();
        let drop = moves.len().saturating_sub(keep);
        moves.drain(..drop);
        moves
    }

    fn survives(
        graph: &GameGraph,
        cs: &ConstraintSet,
        state: StateId,
        remaining: u32,
        max_window: u32,
        prefix: &mut PlayPrefix,
        memo: &mut Memo,
    ) -> Result<bool, OracleError> {
        let suffix = recent_ego_moves(graph, prefix, max_window as usize - 1);
        let ego_moves = prefix
            .states()
            .iter()
            .take(prefix.len())
            .filter(|&&s| graph.owner(s) == Player::Ego)
            .count() as u32;
        let key = (state, suffix, ego_moves.min(max_window), remaining);
        if let Some(&cached) = memo.get(&key) {
            return Ok(cached);
        }

        let result = match graph.owner(state) {
            Player::Ego => {
                if remaining == 0 {
                    true
                } else {
                    let mut survivable = false;
                    for &(action, dst) in graph.successors(state).expect("state from this graph") {
                        prefix.push(graph, action).expect("transition exists");
                        let ok = play_satisfies(graph, prefix, cs, None)?
                            && survives(graph, cs, dst, remaining - 1, max_window, prefix, memo)?;
                        prefix.pop();
                        if ok {
                            survivable = true;
                            break;
                        }
                    }
                    survivable
                }
            }
            Player::Alter => {
                let mut survivable = true;
                for &(action, dst) in graph.successors(state).expect("state from this graph") {
                    prefix.push(graph, action).expect("transition exists");
                    let ok = survives(graph, cs, dst, remaining, max_window, prefix, memo)?;
                    prefix.pop();
                    if !ok {
                        survivable = false;
                        break;
                    }
                }
                survivable
            }
        };
        memo.insert(key, result);
        Ok(result)
    }

    let mut prefix = PlayPrefix::at_initial(graph);
    let mut memo = Memo::default();
    survives(
        graph,
        cs,
        graph.initial(),
        depth,
        max_window,
        &mut prefix,
        &mut memo,
    )
}

/// Verdicts of the solver and both oracles on one instance.
#[derive(Debug, Clone, Copy)]
pub struct TripleCheck {
    pub solver_win: bool,
    pub fixpoint_win: bool,
    pub enumeration_win: bool,
    /// Depth the enumeration verdict was taken at (doubled once if it
    /// initially disagreed with agreeing solver and fixpoint verdicts).
    pub depth_used: u32,
}

impl TripleCheck {
    pub fn all_agree(&self) -> bool {
        self.solver_win == self.fixpoint_win && self.fixpoint_win == self.enumeration_win
    }
}

/// Default enumeration depth for a constraint set: enough Ego moves to fill
/// the longest window twice over, plus slack to reach it.
pub fn default_enumeration_depth(cs: &ConstraintSet) -> u32 {
    2 * cs.iter().map(|c| c.window).max().unwrap_or(1) + 4
}

/// Solves directly and with both oracles, retrying the play enumeration once
/// at doubled depth if it disagrees while the other two agree.
pub fn triple_check(
    graph: &GameGraph,
    cs: &ConstraintSet,
    depth: u32,
    config: &OracleConfig,
) -> Result<TripleCheck, OracleError> {
    let report = solve_direct(graph, cs, None, None)?;
    let solver_win = report.verdict == Verdict::Win;

    let winning = oracle_winning(graph, cs, config)?;
    let initial = Situation {
        state: graph.initial(),
        histories: cs.initial_histories(),
    };
    let fixpoint_win = winning.contains(&initial);

    let mut depth_used = depth;
    let mut enumeration_win = oracle_play_enumeration(graph, cs, depth, config)?;
    if solver_win == fixpoint_win && enumeration_win != solver_win {
        depth_used = (depth * 2).min(config.max_depth);
        if depth_used > depth {
            enumeration_win = oracle_play_enumeration(graph, cs, depth_used, config)?;
        }
    }

    Ok(TripleCheck {
        solver_win,
        fixpoint_win,
        enumeration_win,
        depth_used,
    })
}

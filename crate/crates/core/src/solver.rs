//! Safety solving on situation graphs, the iterated window procedure, and
//! strategy extraction/verification.
//!
//! Solving a constraint set over a game reduces to a safety game on the
//! situation graph: Ego must forever avoid the violating situations. The
//! losing region is the classical attractor fixpoint — an Alter situation is
//! losing if *any* successor is losing, an Ego situation if *all* successors
//! are — computed backward with per-situation counters. Winnable marks
//! (frontiers whose verdict transfers from the previous iteration) count as
//! safe sinks: winning by construction.
//!
//! The iterated procedure exploits window monotony. For a Min constraint,
//! winning under a window of `c` own moves implies winning under any longer
//! window, so windows are tried from short to long, pruning each graph with
//! the previous winning set, and the first win is final. Dually, for a Max
//! constraint, *losing* at `c` implies losing at any longer window, so a loss
//! at any iterate is final and a win must be re-established up to the full
//! window length.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintKind, ConstraintSet, HistoryVec};
use crate::game::{ActionId, GameGraph, PlayPrefix, Player};
use crate::situation::{
    build, build_from, related, MarkMeaning, PruneContext, Situation, SituationError,
    SituationGraph, SituationId,
};

/// Per-situation verdicts of a solved situation graph. Every situation gets a
/// verdict; `winning` is the complement of `losing`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinningRegion {
    winning: Vec<bool>,
    winning_count: usize,
}

impl WinningRegion {
    pub fn is_winning(&self, id: SituationId) -> bool {
        self.winning[id.0 as usize]
    }

    pub fn winning_count(&self) -> usize {
        self.winning_count
    }

    pub fn losing_count(&self) -> usize {
        self.winning.len() - self.winning_count
    }

    /// One flag per situation id, `true` when winning.
    pub fn mask(&self) -> &[bool] {
        &self.winning
    }

    pub fn winning_ids(&self) -> impl Iterator<Item = SituationId> + '_ {
        self.ids_where(true)
    }

    pub fn losing_ids(&self) -> impl Iterator<Item = SituationId> + '_ {
        self.ids_where(false)
    }

    fn ids_where(&self, value: bool) -> impl Iterator<Item = SituationId> + '_ {
        self.winning
            .iter()
            .enumerate()
            .filter(move |&(_, &w)| w == value)
            .map(|(i, _)| SituationId(i as u32))
    }
}

/// Computes the safety-game verdicts: losing situations are those from which
/// Alter can force a violating situation (or a dead end that is not a
/// winnable mark); everything else is winning.
pub fn find_winning_region(sg: &SituationGraph) -> WinningRegion {
    let n = sg.situation_count();

    // Reverse adjacency, one entry per edge.
    let mut pred_offsets = vec![0u32; n + 1];
    for id in sg.ids() {
        for &(_, dst) in sg.successors(id) {
            pred_offsets[dst.0 as usize + 1] += 1;
        }
    }
    for i in 0..n {
        pred_offsets[i + 1] += pred_offsets[i];
    }
    let mut preds = vec![0u32; sg.transition_count()];
    let mut cursor = pred_offsets.clone();
    for id in sg.ids() {
        for &(_, dst) in sg.successors(id) {
            preds[cursor[dst.0 as usize] as usize] = id.0;
            cursor[dst.0 as usize] += 1;
        }
    }

    // For Ego situations, the number of successors not yet known losing.
    let mut safe_out: Vec<u32> = sg.ids().map(|id| sg.successors(id).len() as u32).collect();
    let mut losing = vec![false; n];
    let mut queue: VecDeque<u32> = VecDeque::new();

    for &v in sg.violating() {
        losing[v.0 as usize] = true;
        queue.push_back(v.0);
    }
    // Dead ends without a transferred verdict are losing for whoever is stuck.
    for id in sg.ids() {
        if sg.successors(id).is_empty()
            && !losing[id.0 as usize]
            && !sg.is_winnable_mark(id)
        {
            losing[id.0 as usize] = true;
            queue.push_back(id.0);
        }
    }

    while let Some(s) = queue.pop_front() {
        let lo = pred_offsets[s as usize] as usize;
        let hi = pred_offsets[s as usize + 1] as usize;
        for &p in &preds[lo..hi] {
            if losing[p as usize] {
                continue;
            }
            match sg.owner(SituationId(p)) {
                // Alter is happy to move into any losing successor.
                Player::Alter => {
                    losing[p as usize] = true;
                    queue.push_back(p);
                }
                // Ego is lost only once every successor is.
                Player::Ego => {
                    safe_out[p as usize] -= 1;
                    if safe_out[p as usize] == 0 {
                        losing[p as usize] = true;
                        queue.push_back(p);
                    }
                }
            }
        }
    }

    let winning: Vec<bool> = losing.iter().map(|&l| !l).collect();
    let winning_count = winning.iter().filter(|&&w| w).count();
    WinningRegion {
        winning,
        winning_count,
    }
}

/// An action choice for each Ego-owned winning situation (winnable marks
/// excepted — their choices live one window length down).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    choices: Vec<Option<ActionId>>,
}

impl Strategy {
    pub fn choice(&self, id: SituationId) -> Option<ActionId> {
        self.choices[id.0 as usize]
    }

    pub fn defined_count(&self) -> usize {
        self.choices.iter().filter(|c| c.is_some()).count()
    }

    /// Entries with a defined choice, ascending by situation id.
    pub fn entries(&self) -> impl Iterator<Item = (SituationId, ActionId)> + '_ {
        self.choices
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|a| (SituationId(i as u32), a)))
    }

    /// Replaces the choice at `id` — for fault-injection tests.
    pub fn override_choice(&mut self, id: SituationId, action: ActionId) {
        self.choices[id.0 as usize] = Some(action);
    }

    /// Removes the choice at `id` — for fault-injection tests.
    pub fn clear_choice(&mut self, id: SituationId) {
        self.choices[id.0 as usize] = None;
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("the initial situation is not winning; no strategy exists")]
    NotWinning,
    #[error("constraint {index} is a {found:?} constraint, but this driver iterates {expected:?} constraints")]
    WrongKind {
        index: usize,
        found: ConstraintKind,
        expected: ConstraintKind,
    },
    #[error(transparent)]
    Situation(#[from] SituationError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

impl SolverError {
    /// Whether this error means a size budget ran out (as opposed to a
    /// broken input or a wrong call).
    pub fn is_budget(&self) -> bool {
        matches!(self, SolverError::Situation(SituationError::LimitExceeded(_)))
    }
}

/// Picks, for every Ego-owned winning situation that is not a winnable mark,
/// the action-smallest transition into a winning situation. Fails if the
/// initial situation is losing.
pub fn extract_strategy(
    sg: &SituationGraph,
    region: &WinningRegion,
) -> Result<Strategy, SolverError> {
    if !region.is_winning(sg.initial()) {
        return Err(SolverError::NotWinning);
    }
    let mut choices = vec![None; sg.situation_count()];
    for id in sg.ids() {
        if !region.is_winning(id) || sg.owner(id) != Player::Ego || sg.is_winnable_mark(id) {
            continue;
        }
        // Successors are action-sorted, so the first winning one is the
        // action-smallest; the fixpoint guarantees it exists.
        let choice = sg
            .successors(id)
            .iter()
            .find(|&&(_, dst)| region.is_winning(dst))
            .map(|&(a, _)| a)
            .expect("a winning Ego situation must have a winning successor");
        choices[id.0 as usize] = Some(choice);
    }
    Ok(Strategy { choices })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Win,
    Lose,
    Inconclusive,
}

/// Structural counts and timing of one solver iteration.
#[derive(Debug, Clone)]
pub struct IterationStats {
    /// Window length of the iterated constraint in this iteration.
    pub window: u32,
    pub situations: u64,
    pub transitions: u64,
    pub winnable_marked: u64,
    pub violating: u64,
    pub winning: u64,
    pub losing: u64,
    pub wall: Duration,
}

/// A winning strategy together with everything needed to play and check it.
#[derive(Debug, Clone)]
pub struct WinningStrategy {
    pub graph: SituationGraph,
    pub region: WinningRegion,
    pub strategy: Strategy,
    /// The constraint set the graph was built for — the iterated constraint
    /// carries the *winning* window length, not necessarily the full one.
    pub constraints: ConstraintSet,
    /// Which constraint was iterated; `Some` for the iterated drivers, `None`
    /// for direct solves. Winnable marks refer to this constraint one window
    /// length down.
    pub iterated_index: Option<usize>,
}

/// The outcome of a solve: verdict, per-iteration statistics, and on a win
/// the strategy bundle. On other verdicts the last evaluated graph is kept so
/// callers can still render or dump it.
#[derive(Debug)]
pub struct SolveReport {
    pub verdict: Verdict,
    /// Window length of the iterated constraint at which the verdict was
    /// reached (`None` for direct solves and for Lose/Inconclusive).
    pub final_window: Option<u32>,
    pub strategy: Option<WinningStrategy>,
    /// The last iteration's graph and verdicts when no strategy exists.
    pub last_graph: Option<(SituationGraph, WinningRegion)>,
    pub iterations: Vec<IterationStats>,
    pub total_wall: Duration,
}

impl SolveReport {
    /// The final iteration's situation graph and winning region, wherever
    /// they ended up.
    pub fn final_graph(&self) -> Option<(&SituationGraph, &WinningRegion)> {
        if let Some(ws) = &self.strategy {
            Some((&ws.graph, &ws.region))
        } else {
            self.last_graph.as_ref().map(|(sg, r)| (sg, r))
        }
    }

    /// Process exit code convention: 0 win, 1 lose, 2 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Win => 0,
            Verdict::Lose => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Largest situation graph over all iterations.
    pub fn peak_situations(&self) -> u64 {
        self.iterations.iter().map(|i| i.situations).max().unwrap_or(0)
    }

    pub fn total_situations(&self) -> u64 {
        self.iterations.iter().map(|i| i.situations).sum()
    }
}

/// Optional per-iteration observer, called after each window is solved —
/// lets long runs report progress without touching the deterministic outputs.
pub type Progress<'a> = Option<&'a mut dyn FnMut(&IterationStats)>;

/// Reborrows a progress callback so it can be handed to several solver calls
/// in sequence.
pub fn reborrow_progress<'b>(progress: &'b mut Progress<'_>) -> Progress<'b> {
    match progress {
        Some(f) => Some(&mut **f),
        None => None,
    }
}

fn run_iteration(
    graph: &GameGraph,
    cs: &ConstraintSet,
    window: u32,
    prune: Option<&PruneContext>,
    limit: Option<u64>,
) -> Result<(SituationGraph, WinningRegion, IterationStats), SolverError> {
    let t0 = Instant::now();
    let sg = build(graph, cs, prune, limit)?;
    let region = find_winning_region(&sg);
    let stats = IterationStats {
        window,
        situations: sg.situation_count() as u64,
        transitions: sg.transition_count() as u64,
        winnable_marked: sg.winnable_marks().len() as u64,
        violating: sg.violating().len() as u64,
        winning: region.winning_count() as u64,
        losing: region.losing_count() as u64,
        wall: t0.elapsed(),
    };
    Ok((sg, region, stats))
}

fn check_kind(
    cs: &ConstraintSet,
    index: usize,
    expected: ConstraintKind,
) -> Result<(), SolverError> {
    if index >= cs.len() {
        return Err(SolverError::Situation(SituationError::BadConstraintIndex {
            index,
            count: cs.len(),
        }));
    }
    let found = cs.get(index).kind;
    if found != expected {
        return Err(SolverError::WrongKind {
            index,
            found,
            expected,
        });
    }
    Ok(())
}

/// Solves by iterating the Min constraint at `iterated_index` from the
/// shortest meaningful window up to its full length. Each iteration prunes
/// with the previous winning set (winnable marks); the first winning iterate
/// is final by monotony. Stops early with `Inconclusive` after
/// `max_iterations` unresolved iterations.
pub fn iterate_min(
    graph: &GameGraph,
    cs: &ConstraintSet,
    iterated_index: usize,
    max_iterations: Option<u32>,
    limit: Option<u64>,
    mut progress: Progress<'_>,
) -> Result<SolveReport, SolverError> {
    check_kind(cs, iterated_index, ConstraintKind::Min)?;
    let t0 = Instant::now();
    let full = *cs.get(iterated_index);
    let start = full.bound.max(1);

    let mut iterations = Vec::new();
    let mut previous_winning: Option<Vec<Situation>> = None;
    let mut last = None;
    for window in start..=full.window {
        let cs_w = cs.with_window(iterated_index, window);
        let prune = previous_winning
            .take()
            .map(|prev| PruneContext::new(iterated_index, MarkMeaning::Winnable, prev));
        let (sg, region, stats) = run_iteration(graph, &cs_w, window, prune.as_ref(), limit)?;
        if let Some(p) = progress.as_mut() {
            p(&stats);
        }
        iterations.push(stats);

        if region.is_winning(sg.initial()) {
            let strategy = extract_strategy(&sg, &region)?;
            return Ok(SolveReport {
                verdict: Verdict::Win,
                final_window: Some(window),
                strategy: Some(WinningStrategy {
                    graph: sg,
                    region,
                    strategy,
                    constraints: cs_w,
                    iterated_index: Some(iterated_index),
                }),
                last_graph: None,
                iterations,
                total_wall: t0.elapsed(),
            });
        }
        if window < full.window {
            if let Some(max) = max_iterations {
                if iterations.len() as u32 >= max {
                    return Ok(SolveReport {
                        verdict: Verdict::Inconclusive,
                        final_window: None,
                        strategy: None,
                        last_graph: Some((sg, region)),
                        iterations,
                        total_wall: t0.elapsed(),
                    });
                }
            }
            previous_winning =
                Some(region.winning_ids().map(|id| sg.situation(id).clone()).collect());
        }
        last = Some((sg, region));
    }

    Ok(SolveReport {
        verdict: Verdict::Lose,
        final_window: None,
        strategy: None,
        last_graph: last,
        iterations,
        total_wall: t0.elapsed(),
    })
}

/// Solves by iterating the Max constraint at `iterated_index` upward. A loss
/// at any window length is final by monotony (losing spreads to longer
/// windows); a win only counts once re-established at the full length. Each
/// iteration prunes with the previous *losing* set.
pub fn iterate_max(
    graph: &GameGraph,
    cs: &ConstraintSet,
    iterated_index: usize,
    limit: Option<u64>,
    mut progress: Progress<'_>,
) -> Result<SolveReport, SolverError> {
    check_kind(cs, iterated_index, ConstraintKind::Max)?;
    let t0 = Instant::now();
    let full = *cs.get(iterated_index);
    let start = full.bound.max(1);

    let mut iterations = Vec::new();
    let mut previous_losing: Option<Vec<Situation>> = None;
    for window in start..=full.window {
        let cs_w = cs.with_window(iterated_index, window);
        let prune = previous_losing
            .take()
            .map(|prev| PruneContext::new(iterated_index, MarkMeaning::NonWinnable, prev));
        let (sg, region, stats) = run_iteration(graph, &cs_w, window, prune.as_ref(), limit)?;
        if let Some(p) = progress.as_mut() {
            p(&stats);
        }
        iterations.push(stats);

        if !region.is_winning(sg.initial()) {
            return Ok(SolveReport {
                verdict: Verdict::Lose,
                final_window: None,
                strategy: None,
                last_graph: Some((sg, region)),
                iterations,
                total_wall: t0.elapsed(),
            });
        }
        if window == full.window {
            let strategy = extract_strategy(&sg, &region)?;
            return Ok(SolveReport {
                verdict: Verdict::Win,
                final_window: Some(window),
                strategy: Some(WinningStrategy {
                    graph: sg,
                    region,
                    strategy,
                    constraints: cs_w,
                    iterated_index: Some(iterated_index),
                }),
                last_graph: None,
                iterations,
                total_wall: t0.elapsed(),
            });
        }
        previous_losing =
            Some(region.losing_ids().map(|id| sg.situation(id).clone()).collect());
    }

    unreachable!("the final window always returns a verdict")
}

/// Solves in one shot at the constraints' full window lengths, without
/// iteration or pruning.
pub fn solve_direct(
    graph: &GameGraph,
    cs: &ConstraintSet,
    limit: Option<u64>,
    mut progress: Progress<'_>,
) -> Result<SolveReport, SolverError> {
    let t0 = Instant::now();
    let window = cs.iter().map(|c| c.window).max().unwrap_or(0);
    let (sg, region, stats) = run_iteration(graph, cs, window, None, limit)?;
    if let Some(p) = progress.as_mut() {
        p(&stats);
    }
    let win = region.is_winning(sg.initial());
    let (strategy, last_graph) = if win {
        let strategy = extract_strategy(&sg, &region)?;
        (
            Some(WinningStrategy {
                graph: sg,
                region,
                strategy,
                constraints: cs.clone(),
                iterated_index: None,
            }),
            None,
        )
    } else {
        (None, Some((sg, region)))
    };
    Ok(SolveReport {
        verdict: if win { Verdict::Win } else { Verdict::Lose },
        final_window: None,
        strategy,
        last_graph,
        iterations: vec![stats],
        total_wall: t0.elapsed(),
    })
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("strategy undefined at reached situation {0}")]
    UndefinedChoice(String),
    #[error("strategy chooses {action:?} at {at}, but no such transition exists")]
    IllegalChoice { at: String, action: String },
    #[error("pruned frontier could not be re-expanded: {0}")]
    Expansion(String),
    #[error("strategy bundle does not fit the given constraint set: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Situation(#[from] SituationError),
    #[error("verification internal inconsistency: {0}")]
    Internal(String),
}

/// One playing frame of the verifier: a solved situation graph and its
/// strategy. Frame 0 is the strategy under test; further frames come from
/// re-expanding winnable marks at the next-shorter window.
struct Frame {
    sg: SituationGraph,
    strategy: Strategy,
}

/// Replays the strategy against every Alter behavior for up to `depth` Ego
/// moves, checking each explored play against the *original* constraint set.
///
/// When play reaches a winnable mark, the pruned frontier is expanded on
/// demand: the graph is rebuilt (unpruned) from the mark's related situation
/// at the next-shorter window, solved, and play continues under the strategy
/// extracted there. Returns `Ok(false)` with certainty — the violating play
/// is re-checked against [`crate::constraints::play_satisfies`] — and
/// `Ok(true)` when every explored play satisfies the constraints.
pub fn verify_strategy(
    graph: &GameGraph,
    cs: &ConstraintSet,
    ws: &WinningStrategy,
    depth: u32,
) -> Result<bool, VerifyError> {
    check_bundle_fits(cs, ws)?;

    // Frame 0 borrows from the bundle; expanded frames are owned.
    let mut frames: Vec<Frame> = Vec::new();
    let mut mark_frames: FxHashMap<SituationId, usize> = FxHashMap::default();

    fn sg_of<'a>(ws: &'a WinningStrategy, frames: &'a [Frame], f: usize) -> &'a SituationGraph {
        if f == 0 {
            &ws.graph
        } else {
            &frames[f - 1].sg
        }
    }
    fn strategy_of<'a>(ws: &'a WinningStrategy, frames: &'a [Frame], f: usize) -> &'a Strategy {
        if f == 0 {
            &ws.strategy
        } else {
            &frames[f - 1].strategy
        }
    }

    // Search arena; parents record the action taken (None for frame switches)
    // so a violating play can be reconstructed.
    struct Node {
        frame: usize,
        sit: SituationId,
        orig: HistoryVec,
        moves: u32,
        parent: Option<(usize, Option<ActionId>)>,
    }
    let mut arena: Vec<Node> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut visited: rustc_hash::FxHashSet<(usize, SituationId, HistoryVec)> =
        rustc_hash::FxHashSet::default();

    let root = Node {
        frame: 0,
        sit: ws.graph.initial(),
        orig: cs.initial_histories(),
        moves: 0,
        parent: None,
    };
    visited.insert((root.frame, root.sit, root.orig.clone()));
    arena.push(root);
    queue.push_back(0);

    let describe = |sg: &SituationGraph, id: SituationId| -> String {
        let sit = sg.situation(id);
        let mut s = graph.state_name(sit.state).to_string();
        for h in &sit.histories {
            s.push_str(&format!(",({h})"));
        }
        s
    };

    while let Some(node_idx) = queue.pop_front() {
        let (frame, sit, moves) = {
            let n = &arena[node_idx];
            (n.frame, n.sit, n.moves)
        };

        // A winnable mark ends this frame; play continues at the shorter
        // window from the related situation. Frame switches cost no move.
        if frame == 0 && ws.graph.is_winnable_mark(sit) {
            let sub = match mark_frames.get(&sit) {
                Some(&f) => f,
                None => {
                    let f = expand_mark(graph, ws, sit)?;
                    frames.push(f);
                    mark_frames.insert(sit, frames.len());
                    frames.len()
                }
            };
            let sub_initial = sg_of(ws, &frames, sub).initial();
            let orig = arena[node_idx].orig.clone();
            if visited.insert((sub, sub_initial, orig.clone())) {
                arena.push(Node {
                    frame: sub,
                    sit: sub_initial,
                    orig,
                    moves,
                    parent: Some((node_idx, None)),
                });
                queue.push_back(arena.len() - 1);
            }
            continue;
        }

        let sg = sg_of(ws, &frames, frame);
        match sg.owner(sit) {
            Player::Ego => {
                if moves >= depth {
                    continue;
                }
                let choice = strategy_of(ws, &frames, frame)
                    .choice(sit)
                    .ok_or_else(|| VerifyError::UndefinedChoice(describe(sg, sit)))?;
                let &(_, dst) = sg
                    .successors(sit)
                    .iter()
                    .find(|&&(a, _)| a == choice)
                    .ok_or_else(|| VerifyError::IllegalChoice {
                        at: describe(sg, sit),
                        action: graph.action_name(choice).to_string(),
                    })?;
                let orig: HistoryVec = arena[node_idx]
                    .orig
                    .iter()
                    .zip(cs.iter())
                    .map(|(h, c)| h.shifted(c.classify(choice)))
                    .collect();
                arena.push(Node {
                    frame,
                    sit: dst,
                    orig: orig.clone(),
                    moves: moves + 1,
                    parent: Some((node_idx, Some(choice))),
                });
                let new_idx = arena.len() - 1;
                if let Some(violated) = orig.iter().zip(cs.iter()).position(|(h, c)| !c.holds(h)) {
                    return confirm_violation(graph, cs, &arena, new_idx, violated);
                }
                if visited.insert((frame, dst, orig)) {
                    queue.push_back(new_idx);
                } else {
                    arena.pop();
                }
            }
            Player::Alter => {
                for &(action, dst) in sg.successors(sit) {
                    let orig = arena[node_idx].orig.clone();
                    if visited.insert((frame, dst, orig.clone())) {
                        arena.push(Node {
                            frame,
                            sit: dst,
                            orig,
                            moves,
                            parent: Some((node_idx, Some(action))),
                        });
                        queue.push_back(arena.len() - 1);
                    }
                }
            }
        }
    }

    return Ok(true);

    /// Rebuilds and solves the subgraph behind a winnable mark.
    fn expand_mark(
        graph: &GameGraph,
        ws: &WinningStrategy,
        mark: SituationId,
    ) -> Result<Frame, VerifyError> {
        let index = ws.iterated_index.ok_or_else(|| {
            VerifyError::Internal("graph has winnable marks but no iterated constraint".into())
        })?;
        let window = ws.constraints.get(index).window;
        if window < 2 {
            return Err(VerifyError::Internal(
                "winnable marks cannot exist at window length 1".into(),
            ));
        }
        let rel = related(ws.graph.situation(mark), index)?;
        let sub_cs = ws.constraints.with_window(index, window - 1);
        let sub_sg = build_from(graph, &sub_cs, rel, None, None)?;
        let sub_region = find_winning_region(&sub_sg);
        if !sub_region.is_winning(sub_sg.initial()) {
            return Err(VerifyError::Expansion(format!(
                "related situation behind mark {} is not winning at window {}",
                mark.0,
                window - 1
            )));
        }
        let strategy = extract_strategy(&sub_sg, &sub_region)
            .map_err(|e| VerifyError::Expansion(e.to_string()))?;
        Ok(Frame {
            sg: sub_sg,
            strategy,
        })
    }

    /// Reconstructs the violating play and double-checks it against
    /// play-level satisfaction before reporting `false`.
    fn confirm_violation(
        graph: &GameGraph,
        cs: &ConstraintSet,
        arena: &[Node],
        node: usize,
        violated: usize,
    ) -> Result<bool, VerifyError> {
        let mut actions: Vec<ActionId> = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            if let Some((parent, action)) = arena[i].parent {
                if let Some(a) = action {
                    actions.push(a);
                }
                cur = Some(parent);
            } else {
                cur = None;
            }
        }
        actions.reverse();
        let prefix = PlayPrefix::from_actions(graph, &actions)
            .map_err(|e| VerifyError::Internal(format!("violating play does not replay: {e}")))?;
        match crate::constraints::play_satisfies(graph, &prefix, cs, None) {
            Ok(false) => Ok(false),
            Ok(true) => Err(VerifyError::Internal(format!(
                "history tracking reports constraint {violated} violated, but the play satisfies the set"
            ))),
            Err(e) => Err(VerifyError::Internal(format!(
                "violating play could not be evaluated: {e}"
            ))),
        }
    }
}

/// The bundle must have the same constraints as `cs` except that the iterated
/// window may be shorter.
fn check_bundle_fits(cs: &ConstraintSet, ws: &WinningStrategy) -> Result<(), VerifyError> {
    if cs.len() != ws.constraints.len() {
        return Err(VerifyError::Mismatch(format!(
            "{} constraints given, strategy solved {}",
            cs.len(),
            ws.constraints.len()
        )));
    }
    for (i, (orig, solved)) in cs.iter().zip(ws.constraints.iter()).enumerate() {
        let window_ok = if Some(i) == ws.iterated_index {
            solved.window <= orig.window
        } else {
            solved.window == orig.window
        };
        if orig.kind != solved.kind
            || orig.action != solved.action
            || orig.bound != solved.bound
            || !window_ok
        {
            return Err(VerifyError::Mismatch(format!(
                "constraint {i} differs between the given set and the strategy bundle"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{CountingConstraint, Entry, History};
    use crate::game::Player;
    use crate::situation::Situation;
    use crate::testgames;

    use Entry::{Hit, Miss, None as Gap};

    fn reference_min(bound: u32, window: u32) -> (GameGraph, ConstraintSet) {
        let g = testgames::reference();
        let a = g.find_action("a").unwrap();
        let cs =
            ConstraintSet::new(&g, vec![CountingConstraint::min(a, bound, window).unwrap()])
                .unwrap();
        (g, cs)
    }

    fn sit(g: &GameGraph, state: &str, entries: &[Entry]) -> Situation {
        Situation {
            state: g.find_state(state).unwrap(),
            histories: smallvec::smallvec![History::from_entries(entries)],
        }
    }

    #[test]
    fn window_one_region_is_all_losing() {
        let (g, cs) = reference_min(1, 1);
        let sg = build(&g, &cs, None, None).unwrap();
        let region = find_winning_region(&sg);
        assert_eq!(region.winning_count(), 0);
        assert!(!region.is_winning(sg.initial()));
    }

    #[test]
    fn window_two_region_matches_the_worked_example() {
        let (g, cs) = reference_min(1, 2);
        let sg = build(&g, &cs, None, None).unwrap();
        let region = find_winning_region(&sg);
        assert_eq!(region.winning_count(), 10);
        assert_eq!(region.losing_count(), 4);
        assert!(!region.is_winning(sg.initial()));

        // The initial miss chain is losing, everything beyond it winning.
        for (state, hist, expect) in [
            ("1", vec![Gap, Gap], false),
            ("2", vec![Miss, Gap], false),
            ("3", vec![Miss, Gap], false),
            ("4", vec![Miss, Miss], false),
            ("7", vec![Miss, Gap], true),
            ("8", vec![Hit, Miss], true),
            ("9", vec![Hit, Hit], true),
            ("5", vec![Miss, Hit], true),
        ] {
            let id = sg.find(&sit(&g, state, &hist)).unwrap();
            assert_eq!(region.is_winning(id), expect, "{state},{hist:?}");
        }
    }

    #[test]
    fn iterated_min_wins_the_reference_game_at_window_three() {
        let (g, cs) = reference_min(1, 7);
        let report = iterate_min(&g, &cs, 0, None, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Win);
        assert_eq!(report.final_window, Some(3));
        assert_eq!(report.iterations.len(), 3);

        let golden: Vec<(u32, u64, u64, u64, u64, u64)> = vec![
            // window, situations, transitions, marks, winning, losing
            (1, 2, 1, 0, 0, 2),
            (2, 14, 16, 0, 10, 4),
            (3, 7, 6, 2, 7, 0),
        ];
        let seen: Vec<_> = report
            .iterations
            .iter()
            .map(|i| (i.window, i.situations, i.transitions, i.winnable_marked, i.winning, i.losing))
            .collect();
        assert_eq!(seen, golden);

        let ws = report.strategy.unwrap();
        assert_eq!(ws.iterated_index, Some(0));
        assert_eq!(ws.constraints.get(0).window, 3);
    }

    #[test]
    fn short_windows_lose_the_reference_game() {
        let (g, cs) = reference_min(1, 1);
        let report = iterate_min(&g, &cs, 0, None, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Lose);
        assert_eq!(report.iterations.len(), 1);
        assert!(report.strategy.is_none());

        let (g, cs) = reference_min(1, 2);
        let report = iterate_min(&g, &cs, 0, None, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Lose);
        assert_eq!(report.iterations.len(), 2);
    }

    #[test]
    fn iteration_caps_yield_inconclusive() {
        let (g, cs) = reference_min(1, 7);
        let report = iterate_min(&g, &cs, 0, Some(2), None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
        assert_eq!(report.iterations.len(), 2);
        assert_eq!(report.exit_code(), 2);
    }

    #[test]
    fn direct_solve_agrees_with_iteration() {
        let (g, cs) = reference_min(1, 3);
        let direct = solve_direct(&g, &cs, None, None).unwrap();
        assert_eq!(direct.verdict, Verdict::Win);
        // Unpruned window-3 graph: no violating situations, everything wins.
        assert_eq!(direct.iterations[0].situations, 21);
        assert_eq!(direct.iterations[0].winnable_marked, 0);

        let (g2, cs2) = reference_min(1, 2);
        let direct2 = solve_direct(&g2, &cs2, None, None).unwrap();
        assert_eq!(direct2.verdict, Verdict::Lose);
        assert_eq!(direct2.iterations[0].situations, 14);
    }

    #[test]
    fn extracted_choices_follow_the_worked_example() {
        let (g, cs) = reference_min(1, 7);
        let ws = iterate_min(&g, &cs, 0, None, None, None).unwrap().strategy.unwrap();
        let a = g.find_action("a").unwrap();
        let not_a = g.find_action("not_a").unwrap();

        let five = ws.graph.find(&sit(&g, "5", &[Miss, Miss, Gap])).unwrap();
        assert_eq!(ws.strategy.choice(five), Some(a));

        let one = ws.graph.find(&sit(&g, "1", &[Gap, Gap, Gap])).unwrap();
        assert_eq!(ws.strategy.choice(one), Some(not_a));

        // Marks carry no choice; their strategy lives a window down.
        let seven = ws.graph.find(&sit(&g, "7", &[Miss, Gap, Gap])).unwrap();
        assert_eq!(ws.strategy.choice(seven), None);
    }

    #[test]
    fn extraction_prefers_the_smallest_winning_action() {
        // Both choices keep winning under max(x,1,1); "x" sorts first.
        let g = testgames::build(
            &[("e", Player::Ego), ("p", Player::Alter), ("q", Player::Alter)],
            "e",
            &["x", "y"],
            &["z"],
            &[("e", "x", "p"), ("e", "y", "q"), ("p", "z", "e"), ("q", "z", "e")],
        );
        let x = g.find_action("x").unwrap();
        let cs = ConstraintSet::new(&g, vec![CountingConstraint::max(x, 1, 1).unwrap()]).unwrap();
        let report = solve_direct(&g, &cs, None, None).unwrap();
        let ws = report.strategy.unwrap();
        assert_eq!(ws.strategy.choice(ws.graph.initial()), Some(x));
    }

    #[test]
    fn extraction_requires_a_winning_initial_situation() {
        let (g, cs) = reference_min(1, 2);
        let sg = build(&g, &cs, None, None).unwrap();
        let region = find_winning_region(&sg);
        assert!(matches!(
            extract_strategy(&sg, &region),
            Err(SolverError::NotWinning)
        ));
    }

    /// Forced loop pressing b every move: e0 -b-> a0 -z-> e0.
    fn forced_b_game() -> GameGraph {
        testgames::build(
            &[("e0", Player::Ego), ("a0", Player::Alter)],
            "e0",
            &["b"],
            &["z"],
            &[("e0", "b", "a0"), ("a0", "z", "e0")],
        )
    }

    /// Like [`forced_b_game`] but with an alternative action c.
    fn optional_b_game() -> GameGraph {
        testgames::build(
            &[("e0", Player::Ego), ("a0", Player::Alter)],
            "e0",
            &["b", "c"],
            &["z"],
            &[("e0", "b", "a0"), ("e0", "c", "a0"), ("a0", "z", "e0")],
        )
    }

    #[test]
    fn forbidden_action_loses_when_forced() {
        let g = forced_b_game();
        let b = g.find_action("b").unwrap();
        let cs = ConstraintSet::new(&g, vec![CountingConstraint::max(b, 0, 1).unwrap()]).unwrap();
        let report = iterate_max(&g, &cs, 0, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Lose);
        assert_eq!(report.iterations.len(), 1);
        assert_eq!(report.exit_code(), 1);
    }

    #[test]
    fn forbidden_action_wins_with_an_alternative() {
        let g = optional_b_game();
        let b = g.find_action("b").unwrap();
        let c = g.find_action("c").unwrap();
        let cs = ConstraintSet::new(&g, vec![CountingConstraint::max(b, 0, 1).unwrap()]).unwrap();
        let report = iterate_max(&g, &cs, 0, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Win);
        assert_eq!(report.final_window, Some(1));
        let ws = report.strategy.unwrap();
        assert_eq!(ws.strategy.choice(ws.graph.initial()), Some(c));
    }

    /// Four-state loop whose Ego moves alternate b, x, b, x, ...
    fn alternating_b_game() -> GameGraph {
        testgames::build(
            &[
                ("e0", Player::Ego),
                ("a0", Player::Alter),
                ("e1", Player::Ego),
                ("a1", Player::Alter),
            ],
            "e0",
            &["b", "x"],
            &["g"],
            &[
                ("e0", "b", "a0"),
                ("a0", "g", "e1"),
                ("e1", "x", "a1"),
                ("a1", "g", "e0"),
            ],
        )
    }

    #[test]
    fn max_iteration_detects_losses_only_at_the_failing_window() {
        let g = alternating_b_game();
        let b = g.find_action("b").unwrap();

        // Every window of three own moves holds two b's: bound 1 loses...
        let cs = ConstraintSet::new(&g, vec![CountingConstraint::max(b, 1, 3).unwrap()]).unwrap();
        let report = iterate_max(&g, &cs, 0, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Lose);
        assert_eq!(report.iterations.len(), 3);

        // ...while bound 2 is satisfied forever.
        let cs = ConstraintSet::new(&g, vec![CountingConstraint::max(b, 2, 3).unwrap()]).unwrap();
        let report = iterate_max(&g, &cs, 0, None, None).unwrap();
        assert_eq!(report.verdict, Verdict::Win);
        assert_eq!(report.final_window, Some(3));
        assert_eq!(report.iterations.len(), 2);
    }

    #[test]
    fn drivers_reject_the_wrong_constraint_kind() {
        let (g, cs) = reference_min(1, 2);
        assert!(matches!(
            iterate_max(&g, &cs, 0, None, None),
            Err(SolverError::WrongKind { .. })
        ));

        let b = forced_b_game();
        let cs_max = ConstraintSet::new(
            &b,
            vec![CountingConstraint::max(b.find_action("b").unwrap(), 0, 1).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            iterate_min(&b, &cs_max, 0, None, None, None),
            Err(SolverError::WrongKind { .. })
        ));
    }

    #[test]
    fn situation_limits_propagate() {
        let (g, cs) = reference_min(1, 7);
        assert!(matches!(
            iterate_min(&g, &cs, 0, None, Some(5), None),
            Err(SolverError::Situation(SituationError::LimitExceeded(5)))
        ));
    }

    #[test]
    fn verification_accepts_the_iterated_strategy() {
        let (g, cs) = reference_min(1, 7);
        let ws = iterate_min(&g, &cs, 0, None, None, None).unwrap().strategy.unwrap();
        // Depth well past the window length; play crosses both pruned marks.
        assert!(verify_strategy(&g, &cs, &ws, 20).unwrap());
        // Depth zero explores no Ego move and trivially passes.
        assert!(verify_strategy(&g, &cs, &ws, 0).unwrap());
    }

    #[test]
    fn verification_catches_an_injected_bad_choice() {
        let g = optional_b_game();
        let b = g.find_action("b").unwrap();
        let c = g.find_action("c").unwrap();
        let cs = ConstraintSet::new(&g, vec![CountingConstraint::max(b, 0, 1).unwrap()]).unwrap();
        let mut ws = iterate_max(&g, &cs, 0, None, None).unwrap().strategy.unwrap();
        assert_eq!(ws.strategy.choice(ws.graph.initial()), Some(c));

        // Flip the choice to the forbidden action: the very first window
        // violates max(b,0,1).
        ws.strategy.override_choice(ws.graph.initial(), b);
        assert_eq!(verify_strategy(&g, &cs, &ws, 8).unwrap(), false);
    }

    #[test]
    fn verification_rejects_impossible_actions() {
        let (g, cs) = reference_min(1, 7);
        let mut ws = iterate_min(&g, &cs, 0, None, None, None).unwrap().strategy.unwrap();
        let five = ws.graph.find(&sit(&g, "5", &[Miss, Miss, Gap])).unwrap();
        // State 5's only transition is labeled a; not_a cannot be played.
        ws.strategy.override_choice(five, g.find_action("not_a").unwrap());
        assert!(matches!(
            verify_strategy(&g, &cs, &ws, 20),
            Err(VerifyError::IllegalChoice { .. })
        ));
    }

    #[test]
    fn verification_rejects_missing_choices() {
        let (g, cs) = reference_min(1, 7);
        let mut ws = iterate_min(&g, &cs, 0, None, None, None).unwrap().strategy.unwrap();
        let five = ws.graph.find(&sit(&g, "5", &[Miss, Miss, Gap])).unwrap();
        ws.strategy.clear_choice(five);
        assert!(matches!(
            verify_strategy(&g, &cs, &ws, 20),
            Err(VerifyError::UndefinedChoice(_))
        ));
    }

    #[test]
    fn verification_checks_bundle_compatibility() {
        let (g, cs) = reference_min(1, 7);
        let ws = iterate_min(&g, &cs, 0, None, None, None).unwrap().strategy.unwrap();
        let (_, other) = reference_min(2, 7);
        assert!(matches!(
            verify_strategy(&g, &other, &ws, 4),
            Err(VerifyError::Mismatch(_))
        ));
    }
}

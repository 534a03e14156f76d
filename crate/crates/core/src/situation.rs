//! Situation graphs: the product of a game graph with constraint histories.
//!
//! A *situation* is a game state plus one history per constraint. Situations
//! advance like the game, except that an Ego move shifts every history while
//! an Alter move copies them unchanged. The situation graph is the reachable
//! part of this product, built worklist-first from a root situation, with two
//! cutoffs:
//!
//! * situations whose histories violate a constraint are kept (so the solver
//!   can seed its unsafe set) but never expanded — the play is already lost
//!   there;
//! * under a [`PruneContext`], situations whose *related* situation (same
//!   state, iterated history one entry shorter) already has a verdict from
//!   the previous solver iteration are cut off: recorded as winnable marks
//!   when the verdict was winning, or folded into the violating set when it
//!   was losing.
//!
//! Construction is deterministic: successors expand in action order, the
//! worklist is FIFO, and ids are assigned in discovery order. Repeated builds
//! of the same inputs produce identical graphs.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::constraints::{ConstraintSet, HistoryVec};
use crate::game::{ActionId, GameGraph, Player, StateId};

/// Dense index of a situation in a [`SituationGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SituationId(pub u32);

/// A game state together with one history per constraint (in constraint-set
/// order).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Situation {
    pub state: StateId,
    pub histories: HistoryVec,
}

/// How to interpret membership of a related situation in
/// [`PruneContext::previous`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkMeaning {
    /// The previous iteration proved the related situation winning — record a
    /// winnable mark and stop expanding (used when iterating Min windows
    /// upward).
    Winnable,
    /// The previous iteration proved the related situation losing — record
    /// the situation as violating (used when iterating Max windows upward).
    NonWinnable,
}

/// Verdicts carried over from the previous solver iteration, used to prune
/// construction at the current window length.
#[derive(Debug, Clone)]
pub struct PruneContext {
    /// Which constraint's window is being iterated.
    pub iterated_index: usize,
    pub mark_meaning: MarkMeaning,
    previous: FxHashSet<Situation>,
}

impl PruneContext {
    pub fn new(
        iterated_index: usize,
        mark_meaning: MarkMeaning,
        previous: impl IntoIterator<Item = Situation>,
    ) -> PruneContext {
        PruneContext {
            iterated_index,
            mark_meaning,
            previous: previous.into_iter().collect(),
        }
    }

    pub fn previous_count(&self) -> usize {
        self.previous.len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SituationError {
    #[error("situation limit exceeded: graph needs more than {0} situations")]
    LimitExceeded(u64),
    #[error("cannot shorten a history of length 1: no smaller window exists")]
    HistoryTooShort,
    #[error("constraint index {index} out of range for {count} constraints")]
    BadConstraintIndex { index: usize, count: usize },
    #[error("root situation does not match the game and constraint windows")]
    RootMismatch,
}

/// The situation whose verdict at the next-shorter window length transfers to
/// `sit` (same state, iterated history with its oldest entry dropped).
pub fn related(sit: &Situation, iterated_index: usize) -> Result<Situation, SituationError> {
    let h = sit
        .histories
        .get(iterated_index)
        .ok_or(SituationError::BadConstraintIndex {
            index: iterated_index,
            count: sit.histories.len(),
        })?;
    if h.len() < 2 {
        return Err(SituationError::HistoryTooShort);
    }
    let mut histories = sit.histories.clone();
    histories[iterated_index] = h.drop_oldest();
    Ok(Situation {
        state: sit.state,
        histories,
    })
}

/// The reachable product of a game with constraint histories. Successor lists
/// are stored per situation in action order; violating situations and
/// winnable marks have no successors recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SituationGraph {
    situations: Vec<Situation>,
    owners: Vec<Player>,
    initial: SituationId,
    succ_offsets: Vec<u32>,
    succ: Vec<(ActionId, SituationId)>,
    violating: Vec<SituationId>,
    winnable_marks: Vec<SituationId>,
}

impl SituationGraph {
    pub fn situation_count(&self) -> usize {
        self.situations.len()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.len()
    }

    pub fn situation(&self, id: SituationId) -> &Situation {
        &self.situations[id.0 as usize]
    }

    pub fn owner(&self, id: SituationId) -> Player {
        self.owners[id.0 as usize]
    }

    pub fn initial(&self) -> SituationId {
        self.initial
    }

    pub fn ids(&self) -> impl Iterator<Item = SituationId> {
        (0..self.situations.len() as u32).map(SituationId)
    }

    pub fn successors(&self, id: SituationId) -> &[(ActionId, SituationId)] {
        let lo = self.succ_offsets[id.0 as usize] as usize;
        let hi = self.succ_offsets[id.0 as usize + 1] as usize;
        &self.succ[lo..hi]
    }

    /// Situations whose histories violate a constraint (including situations
    /// a NonWinnable prune context condemned), ascending.
    pub fn violating(&self) -> &[SituationId] {
        &self.violating
    }

    /// Situations cut off because their related situation was already proved
    /// winning, ascending.
    pub fn winnable_marks(&self) -> &[SituationId] {
        &self.winnable_marks
    }

    pub fn is_violating(&self, id: SituationId) -> bool {
        self.violating.binary_search(&id).is_ok()
    }

    pub fn is_winnable_mark(&self, id: SituationId) -> bool {
        self.winnable_marks.binary_search(&id).is_ok()
    }

    /// Linear lookup by value; meant for tests and tools, not hot paths.
    pub fn find(&self, sit: &Situation) -> Option<SituationId> {
        self.situations
            .iter()
            .position(|s| s == sit)
            .map(|i| SituationId(i as u32))
    }

    /// Assembles a graph from adjacency lists — the brute-force oracle builds
    /// its graphs independently and only borrows this representation.
    pub(crate) fn from_parts(
        graph: &GameGraph,
        situations: Vec<Situation>,
        edges: &[(u32, ActionId, u32)],
        mut violating: Vec<SituationId>,
        mut winnable_marks: Vec<SituationId>,
    ) -> SituationGraph {
        let n = situations.len();
        let owners: Vec<Player> = situations.iter().map(|s| graph.owner(s.state)).collect();
        let mut counts = vec![0u32; n + 1];
        for &(src, _, _) in edges {
            counts[src as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let succ_offsets = counts.clone();
        let mut succ = vec![(ActionId(0), SituationId(0)); edges.len()];
        let mut cursor = counts;
        for &(src, action, dst) in edges {
            let at = cursor[src as usize] as usize;
            succ[at] = (action, SituationId(dst));
            cursor[src as usize] += 1;
        }
        violating.sort();
        winnable_marks.sort();
        SituationGraph {
            situations,
            owners,
            initial: SituationId(0),
            succ_offsets,
            succ,
            violating,
            winnable_marks,
        }
    }
}

/// Builds the situation graph rooted at the game's initial situation (all
/// histories None).
pub fn build(
    graph: &GameGraph,
    cs: &ConstraintSet,
    prune: Option<&PruneContext>,
    limit: Option<u64>,
) -> Result<SituationGraph, SituationError> {
    let root = Situation {
        state: graph.initial(),
        histories: cs.initial_histories(),
    };
    build_from(graph, cs, root, prune, limit)
}

/// Builds the situation graph rooted at an arbitrary situation — the
/// verification path uses this to re-expand a pruned frontier from a related
/// situation. The root is checked against the game and constraint windows.
pub fn build_from(
    graph: &GameGraph,
    cs: &ConstraintSet,
    root: Situation,
    prune: Option<&PruneContext>,
    limit: Option<u64>,
) -> Result<SituationGraph, SituationError> {
    if root.state.0 as usize >= graph.state_count()
        || root.histories.len() != cs.len()
        || root
            .histories
            .iter()
            .zip(cs.iter())
            .any(|(h, c)| h.len() != c.window)
    {
        return Err(SituationError::RootMismatch);
    }
    if let Some(pc) = prune {
        if pc.iterated_index >= cs.len() {
            return Err(SituationError::BadConstraintIndex {
                index: pc.iterated_index,
                count: cs.len(),
            });
        }
    }

    let mut situations: Vec<Situation> = Vec::new();
    let mut index: FxHashMap<Situation, u32> = FxHashMap::default();
    let mut violating: Vec<SituationId> = Vec::new();
    let mut winnable_marks: Vec<SituationId> = Vec::new();
    let mut queue: VecDeque<u32> = VecDeque::new();
    let mut edges: Vec<(u32, ActionId, u32)> = Vec::new();

    // Interns a situation, classifying it on first sight: violating and
    // pruned situations are recorded but not queued for expansion. The root
    // is violation-checked like everything else but never pruned — pruning
    // only applies to situations *reached* during construction.
    let mut intern = |sit: Situation,
                      is_root: bool,
                      situations: &mut Vec<Situation>,
                      queue: &mut VecDeque<u32>,
                      violating: &mut Vec<SituationId>,
                      winnable_marks: &mut Vec<SituationId>|
     -> Result<u32, SituationError> {
        if let Some(&id) = index.get(&sit) {
            return Ok(id);
        }
        if let Some(max) = limit {
            if situations.len() as u64 >= max {
                return Err(SituationError::LimitExceeded(max));
            }
        }
        let id = situations.len() as u32;
        let violates = sit
            .histories
            .iter()
            .zip(cs.iter())
            .any(|(h, c)| !c.holds(h));
        if violates {
            violating.push(SituationId(id));
        } else {
            let pruned = match prune {
                Some(pc) if !is_root && sit.histories[pc.iterated_index].len() >= 2 => {
                    let rel = related(&sit, pc.iterated_index).expect("length checked above");
                    pc.previous.contains(&rel).then_some(pc.mark_meaning)
                }
                _ => None,
            };
            match pruned {
                Some(MarkMeaning::Winnable) => winnable_marks.push(SituationId(id)),
                Some(MarkMeaning::NonWinnable) => violating.push(SituationId(id)),
                None => queue.push_back(id),
            }
        }
        index.insert(sit.clone(), id);
        situations.push(sit);
        Ok(id)
    };

    intern(
        root,
        true,
        &mut situations,
        &mut queue,
        &mut violating,
        &mut winnable_marks,
    )?;

    while let Some(cur) = queue.pop_front() {
        let state = situations[cur as usize].state;
        let histories = situations[cur as usize].histories.clone();
        let owner = graph.owner(state);
        for &(action, dst) in graph.succ_slice(state) {
            let next_histories = match owner {
                Player::Ego => histories
                    .iter()
                    .zip(cs.iter())
                    .map(|(h, c)| h.shifted(c.classify(action)))
                    .collect(),
                Player::Alter => histories.clone(),
            };
            let next = Situation {
                state: dst,
                histories: next_histories,
            };
            let next_id = intern(
                next,
                false,
                &mut situations,
                &mut queue,
                &mut violating,
                &mut winnable_marks,
            )?;
            edges.push((cur, action, next_id));
        }
    }

    Ok(SituationGraph::from_parts(
        graph,
        situations,
        &edges,
        violating,
        winnable_marks,
    ))
}

/// Renders the graph in DOT: circles for Ego situations, diamonds for Alter,
/// labels `state,(h1),(h2)...` newest-first with `-` for None. Situations
/// whose id is set in `highlight` (typically the winning region) are filled
/// gray. Output is deterministic: nodes in id order, edges in stored order.
pub fn to_dot(sg: &SituationGraph, graph: &GameGraph, highlight: Option<&[bool]>) -> String {
    let mut out = String::new();
    out.push_str("digraph situations {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  __init [shape=point, width=0.05];\n");
    for id in sg.ids() {
        let sit = sg.situation(id);
        let shape = match sg.owner(id) {
            Player::Ego => "circle",
            Player::Alter => "diamond",
        };
        let mut label = graph.state_name(sit.state).to_string();
        for h in &sit.histories {
            label.push_str(",(");
            for (i, e) in h.entries().enumerate() {
                if i > 0 {
                    label.push(',');
                }
                label.push(match e {
                    crate::constraints::Entry::Miss => '0',
                    crate::constraints::Entry::Hit => '1',
                    crate::constraints::Entry::None => '-',
                });
            }
            label.push(')');
        }
        let fill = match highlight {
            Some(set) if set[id.0 as usize] => ", style=filled, fillcolor=gray85",
            _ => "",
        };
        writeln!(out, "  s{} [shape={shape}, label=\"{label}\"{fill}];", id.0).unwrap();
    }
    writeln!(out, "  __init -> s{};", sg.initial().0).unwrap();
    for id in sg.ids() {
        for &(action, dst) in sg.successors(id) {
            writeln!(
                out,
                "  s{} -> s{} [label=\"{}\"];",
                id.0,
                dst.0,
                graph.action_name(action)
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

/// Renders one situation per line, `stateName|h1|h2|...` with histories
/// newest-first as runs of `0`/`1`/`-`, in id order.
pub fn dump_situations(sg: &SituationGraph, graph: &GameGraph) -> String {
    let mut out = String::new();
    for id in sg.ids() {
        let sit = sg.situation(id);
        out.push_str(graph.state_name(sit.state));
        for h in &sit.histories {
            out.push('|');
            write!(out, "{h}").unwrap();
        }
        out.push('\n');
    }
    out
}

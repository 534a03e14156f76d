//! Two-player turn-based game graphs.
//!
//! A game is a finite directed graph whose states are partitioned between two
//! players, Ego and Alter. Each state belongs to exactly one player, every
//! transition is labeled with an action from the alphabet of the player owning
//! its source, and plays start in a designated Ego-owned initial state. Valid
//! games satisfy five structural conditions, checked by [`GameGraph::validate`]:
//!
//! * **Bipartition** — every transition connects states of opposite owners, so
//!   the players strictly alternate moves.
//! * **Deadlock-freedom** — every state has at least one outgoing transition.
//! * **Alphabet restriction** — a state's transitions only use actions from its
//!   owner's alphabet.
//! * **Determinacy** — no state has two transitions with the same action; the
//!   chosen action determines the successor.
//! * **Initial owner** — the initial state is Ego-owned.
//!
//! Validation is eager: [`parse_game`] rejects files whose graph violates any
//! condition, so downstream code may assume a valid graph.
//!
//! States and actions are referred to by dense ids. State ids follow
//! declaration order; action ids enumerate the Ego alphabet first, then the
//! Alter alphabet, each sorted by name, so id order within an alphabet is name
//! order. Names are kept only for input/output.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The two players. Ego owns the protagonist's states (and the constraints to
/// come are on Ego's moves); Alter is the adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Ego,
    Alter,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Ego => Player::Alter,
            Player::Alter => Player::Ego,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Ego => write!(f, "ego"),
            Player::Alter => write!(f, "alter"),
        }
    }
}

/// Dense index of a state in a [`GameGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

/// Dense index of an action. Ego actions come first, then Alter actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u32);

/// Which structural condition a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    Bipartition,
    Deadlock,
    AlphabetRestriction,
    Determinacy,
    InitialOwner,
}

/// One structural defect found by [`GameGraph::validate`].
#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

/// All defects of a graph; empty means the graph is a valid game.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:?}: {}", v.kind, v.message)?;
        }
        Ok(())
    }
}

/// Errors reading or assembling a game file.
#[derive(Debug, Error)]
pub enum GameFileError {
    #[error("malformed game file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate state name {0:?}")]
    DuplicateState(String),
    #[error("duplicate action name {0:?} (alphabets must be disjoint sets)")]
    DuplicateAction(String),
    #[error("unknown state {name:?} in {context}")]
    UnknownState { name: String, context: String },
    #[error("unknown action {name:?} in {context}")]
    UnknownAction { name: String, context: String },
    #[error("invalid game: {0}")]
    Validation(ValidationReport),
}

/// Misuse of a [`GameGraph`] accessor with ids or plays from elsewhere.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("unknown state id {0:?}")]
    UnknownStateId(StateId),
    #[error("unknown action id {0:?}")]
    UnknownActionId(ActionId),
    #[error("invalid play prefix: {0}")]
    InvalidPrefix(String),
}

/// Serde mirror of the on-disk JSON format.
#[derive(Serialize, Deserialize)]
struct GameFile {
    states: Vec<StateDecl>,
    initial: String,
    ego_actions: Vec<String>,
    alter_actions: Vec<String>,
    transitions: Vec<(String, String, String)>,
}

#[derive(Serialize, Deserialize)]
struct StateDecl {
    name: String,
    owner: Player,
}

/// A two-player game graph in compressed adjacency form.
///
/// Successor lists are stored per state, sorted by action id (hence by action
/// name within an alphabet), which fixes the iteration order used everywhere
/// downstream and makes all derived outputs deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameGraph {
    state_names: Vec<String>,
    owners: Vec<Player>,
    initial: StateId,
    action_names: Vec<String>,
    ego_action_count: u32,
    succ_offsets: Vec<u32>,
    succ: Vec<(ActionId, StateId)>,
}

impl GameGraph {
    /// Resolves names to ids and builds the adjacency structure, then checks
    /// the five structural conditions. Identical repeated transitions collapse
    /// to one (transitions form a set); two transitions sharing source and
    /// action but not target are kept and flagged as a Determinacy violation.
    pub fn new(
        states: Vec<(String, Player)>,
        initial: &str,
        ego_actions: Vec<String>,
        alter_actions: Vec<String>,
        transitions: Vec<(String, String, String)>,
    ) -> Result<GameGraph, GameFileError> {
        let graph = Self::assemble(states, initial, ego_actions, alter_actions, transitions)?;
        let report = graph.validate();
        if report.is_ok() {
            Ok(graph)
        } else {
            Err(GameFileError::Validation(report))
        }
    }

    /// Like [`GameGraph::new`] but skips condition validation, so invalid
    /// graphs can be constructed and inspected (used by tests that probe
    /// [`GameGraph::validate`] itself).
    pub fn assemble(
        states: Vec<(String, Player)>,
        initial: &str,
        mut ego_actions: Vec<String>,
        mut alter_actions: Vec<String>,
        transitions: Vec<(String, String, String)>,
    ) -> Result<GameGraph, GameFileError> {
        if states.is_empty() {
            return Err(GameFileError::Validation(ValidationReport {
                violations: vec![Violation {
                    kind: ViolationKind::InitialOwner,
                    message: "game declares no states, so no initial state exists".into(),
                }],
            }));
        }

        let mut state_names = Vec::with_capacity(states.len());
        let mut owners = Vec::with_capacity(states.len());
        let mut state_ids: HashMap<String, u32> = HashMap::with_capacity(states.len());
        for (name, owner) in states {
            if state_ids.insert(name.clone(), state_names.len() as u32).is_some() {
                return Err(GameFileError::DuplicateState(name));
            }
            state_names.push(name);
            owners.push(owner);
        }

        ego_actions.sort();
        alter_actions.sort();
        let ego_action_count = ego_actions.len() as u32;
        let mut action_names = ego_actions;
        action_names.append(&mut alter_actions);
        let mut action_ids: HashMap<String, u32> = HashMap::with_capacity(action_names.len());
        for (i, name) in action_names.iter().enumerate() {
            if action_ids.insert(name.clone(), i as u32).is_some() {
                return Err(GameFileError::DuplicateAction(name.clone()));
            }
        }

        let initial = StateId(*state_ids.get(initial).ok_or_else(|| GameFileError::UnknownState {
            name: initial.to_string(),
            context: "initial".into(),
        })?);

        let mut adjacency: Vec<Vec<(ActionId, StateId)>> = vec![Vec::new(); state_names.len()];
        for (src, action, dst) in &transitions {
            let context = || format!("transition [{src:?}, {action:?}, {dst:?}]");
            let s = *state_ids.get(src).ok_or_else(|| GameFileError::UnknownState {
                name: src.clone(),
                context: context(),
            })?;
            let a = *action_ids.get(action).ok_or_else(|| GameFileError::UnknownAction {
                name: action.clone(),
                context: context(),
            })?;
            let d = *state_ids.get(dst).ok_or_else(|| GameFileError::UnknownState {
                name: dst.clone(),
                context: context(),
            })?;
            adjacency[s as usize].push((ActionId(a), StateId(d)));
        }

        let mut succ_offsets = Vec::with_capacity(state_names.len() + 1);
        let mut succ = Vec::with_capacity(transitions.len());
        succ_offsets.push(0);
        for list in &mut adjacency {
            list.sort();
            list.dedup();
            succ.extend_from_slice(list);
            succ_offsets.push(succ.len() as u32);
        }

        Ok(GameGraph {
            state_names,
            owners,
            initial,
            action_names,
            ego_action_count,
            succ_offsets,
            succ,
        })
    }

    /// Checks the five structural conditions and reports every defect found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut report = |kind, message| violations.push(Violation { kind, message });

        if self.owner(self.initial) != Player::Ego {
            report(
                ViolationKind::InitialOwner,
                format!(
                    "initial state {:?} is owned by alter; plays must start with an ego move",
                    self.state_name(self.initial)
                ),
            );
        }

        for s in self.states() {
            let block = self.succ_slice(s);
            if block.is_empty() {
                report(
                    ViolationKind::Deadlock,
                    format!("state {:?} has no outgoing transitions", self.state_name(s)),
                );
            }
            for (i, &(a, d)) in block.iter().enumerate() {
                if self.owner(d) == self.owner(s) {
                    report(
                        ViolationKind::Bipartition,
                        format!(
                            "transition ({:?}, {:?}, {:?}) connects two {}-owned states",
                            self.state_name(s),
                            self.action_name(a),
                            self.state_name(d),
                            self.owner(s)
                        ),
                    );
                }
                if self.action_owner(a) != self.owner(s) {
                    report(
                        ViolationKind::AlphabetRestriction,
                        format!(
                            "{}-owned state {:?} moves with {}-action {:?}",
                            self.owner(s),
                            self.state_name(s),
                            self.action_owner(a),
                            self.action_name(a)
                        ),
                    );
                }
                if i > 0 && block[i - 1].0 == a {
                    report(
                        ViolationKind::Determinacy,
                        format!(
                            "state {:?} has two transitions labeled {:?}",
                            self.state_name(s),
                            self.action_name(a)
                        ),
                    );
                }
            }
        }

        ValidationReport { violations }
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.len()
    }

    pub fn action_count(&self) -> usize {
        self.action_names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_names.len() as u32).map(StateId)
    }

    /// Panics if `s` is out of range; state ids should originate from this graph.
    pub fn owner(&self, s: StateId) -> Player {
        self.owners[s.0 as usize]
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.0 as usize]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a.0 as usize]
    }

    pub fn action_owner(&self, a: ActionId) -> Player {
        if a.0 < self.ego_action_count {
            Player::Ego
        } else {
            Player::Alter
        }
    }

    pub fn actions_of(&self, p: Player) -> impl Iterator<Item = ActionId> {
        let (lo, hi) = match p {
            Player::Ego => (0, self.ego_action_count),
            Player::Alter => (self.ego_action_count, self.action_names.len() as u32),
        };
        (lo..hi).map(ActionId)
    }

    pub fn find_state(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(|i| StateId(i as u32))
    }

    pub fn find_action(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name).map(|i| ActionId(i as u32))
    }

    /// Outgoing transitions of `s`, sorted by action id.
    pub fn successors(&self, s: StateId) -> Result<&[(ActionId, StateId)], GameError> {
        if (s.0 as usize) < self.state_count() {
            Ok(self.succ_slice(s))
        } else {
            Err(GameError::UnknownStateId(s))
        }
    }

    /// The unique target of `action` at `s`, if that transition exists.
    pub fn step(&self, s: StateId, action: ActionId) -> Option<StateId> {
        self.succ_slice(s).iter().find(|&&(a, _)| a == action).map(|&(_, d)| d)
    }

    /// Largest out-degree over all states.
    pub fn max_fanout(&self) -> usize {
        self.states().map(|s| self.succ_slice(s).len()).max().unwrap_or(0)
    }

    pub(crate) fn succ_slice(&self, s: StateId) -> &[(ActionId, StateId)] {
        let lo = self.succ_offsets[s.0 as usize] as usize;
        let hi = self.succ_offsets[s.0 as usize + 1] as usize;
        &self.succ[lo..hi]
    }
}

/// Parses and validates a game from its JSON representation.
pub fn parse_game(text: &str) -> Result<GameGraph, GameFileError> {
    let file: GameFile = serde_json::from_str(text)?;
    GameGraph::new(
        file.states.into_iter().map(|s| (s.name, s.owner)).collect(),
        &file.initial,
        file.ego_actions,
        file.alter_actions,
        file.transitions,
    )
}

/// Serializes a game back to the JSON format, deterministically: states in id
/// order, alphabets sorted, transitions grouped by source state in action
/// order. `parse_game(&serialize_game(&g))` reproduces `g` exactly.
pub fn serialize_game(graph: &GameGraph) -> String {
    let file = GameFile {
        states: graph
            .states()
            .map(|s| StateDecl {
                name: graph.state_name(s).to_string(),
                owner: graph.owner(s),
            })
            .collect(),
        initial: graph.state_name(graph.initial()).to_string(),
        ego_actions: graph.actions_of(Player::Ego).map(|a| graph.action_name(a).to_string()).collect(),
        alter_actions: graph.actions_of(Player::Alter).map(|a| graph.action_name(a).to_string()).collect(),
        transitions: graph
            .states()
            .flat_map(|s| {
                graph.succ_slice(s).iter().map(move |&(a, d)| (s, a, d)).collect::<Vec<_>>()
            })
            .map(|(s, a, d)| {
                (
                    graph.state_name(s).to_string(),
                    graph.action_name(a).to_string(),
                    graph.state_name(d).to_string(),
                )
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("game serialization cannot fail");
    out.push('\n');
    out
}

/// A finite play prefix: the visited states and the actions taken between
/// them. By determinacy a play is fully described by its action sequence, but
/// the states are kept so constraint evaluation can see whose turn each move
/// was.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayPrefix {
    states: Vec<StateId>,
    actions: Vec<ActionId>,
}

impl PlayPrefix {
    /// The empty prefix sitting at the game's initial state.
    pub fn at_initial(graph: &GameGraph) -> PlayPrefix {
        PlayPrefix {
            states: vec![graph.initial()],
            actions: Vec::new(),
        }
    }

    /// Builds the unique prefix that plays `actions` from the initial state.
    pub fn from_actions(graph: &GameGraph, actions: &[ActionId]) -> Result<PlayPrefix, GameError> {
        let mut prefix = PlayPrefix::at_initial(graph);
        for &a in actions {
            prefix.push(graph, a)?;
        }
        Ok(prefix)
    }

    /// Extends the prefix by one move; fails if the current state has no
    /// transition labeled `action`.
    pub fn push(&mut self, graph: &GameGraph, action: ActionId) -> Result<(), GameError> {
        let here = self.last_state();
        match graph.step(here, action) {
            Some(next) => {
                self.actions.push(action);
                self.states.push(next);
                Ok(())
            }
            None => Err(GameError::InvalidPrefix(format!(
                "state {:?} has no transition labeled {:?}",
                graph.state_name(here),
                graph.action_name(action)
            ))),
        }
    }

    /// Undoes the last move, if any.
    pub fn pop(&mut self) {
        if !self.actions.is_empty() {
            self.actions.pop();
            self.states.pop();
        }
    }

    /// Checks that the prefix starts at the initial state and follows actual
    /// transitions of `graph`.
    pub fn check_on(&self, graph: &GameGraph) -> Result<(), GameError> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(GameError::InvalidPrefix(
                "prefix must visit one more state than it has actions".into(),
            ));
        }
        if self.states[0] != graph.initial() {
            return Err(GameError::InvalidPrefix(format!(
                "prefix starts at {:?}, not the initial state",
                self.states[0]
            )));
        }
        for (i, &a) in self.actions.iter().enumerate() {
            if self.states[i].0 as usize >= graph.state_count() {
                return Err(GameError::UnknownStateId(self.states[i]));
            }
            if graph.step(self.states[i], a) != Some(self.states[i + 1]) {
                return Err(GameError::InvalidPrefix(format!(
                    "({:?}, {:?}, {:?}) is not a transition of the game",
                    self.states[i],
                    a,
                    self.states[i + 1]
                )));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last_state(&self) -> StateId {
        *self.states.last().expect("prefix always holds at least the start state")
    }
}

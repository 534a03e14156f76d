//! Window counting constraints and the per-constraint move histories that
//! track them.
//!
//! A counting constraint `min:a:k:l` (resp. `max:a:k:l`) requires that every
//! window of exactly `l` consecutive Ego moves contains the action `a` at
//! least (resp. at most) `k` times. Constraints range over Ego's moves only;
//! Alter's moves neither open nor advance windows.
//!
//! While a play unfolds, each constraint is tracked by a *history*: the last
//! `l` Ego moves classified as Hit (the constrained action), Miss (another Ego
//! action), or None (no move yet — plays shorter than the window). Histories
//! are newest-first, and None entries can only occupy a contiguous oldest
//! suffix, since moves are appended at the front and fall off the back.
//!
//! A history is kept packed as 2-bit entries in a `u64`, which caps window
//! lengths at [`MAX_WINDOW`] and makes histories cheap to copy, hash, and
//! shift — they are the dominant payload of situation graphs.

use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

use crate::game::{ActionId, GameError, GameGraph, PlayPrefix, Player};

/// Largest supported window length: 32 entries of 2 bits fill a `u64`.
pub const MAX_WINDOW: u32 = 32;

/// One slot of a history, newest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entry {
    /// An Ego move other than the constrained action.
    Miss,
    /// The constrained action.
    Hit,
    /// No move recorded yet (play shorter than the window).
    None,
}

impl Entry {
    fn code(self) -> u64 {
        match self {
            Entry::Miss => 0b00,
            Entry::Hit => 0b01,
            Entry::None => 0b10,
        }
    }

    fn from_code(code: u64) -> Entry {
        match code {
            0b00 => Entry::Miss,
            0b01 => Entry::Hit,
            0b10 => Entry::None,
            _ => unreachable!("invalid history entry code {code}"),
        }
    }

    fn glyph(self) -> char {
        match self {
            Entry::Miss => '0',
            Entry::Hit => '1',
            Entry::None => '-',
        }
    }
}

// Per-entry bit masks over the packed representation: Hit entries set the low
// bit of their 2-bit slot, None entries the high bit.
const HIT_BITS: u64 = 0x5555_5555_5555_5555;
const NONE_BITS: u64 = 0xAAAA_AAAA_AAAA_AAAA;

/// The last `len` Ego moves as seen by one constraint, packed 2 bits per
/// entry with the newest move in the lowest bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    bits: u64,
    len: u8,
}

impl History {
    fn mask(len: u32) -> u64 {
        debug_assert!((1..=MAX_WINDOW).contains(&len));
        u64::MAX >> (64 - 2 * len)
    }

    /// The history before any Ego move: all entries None.
    pub fn all_none(len: u32) -> History {
        History {
            bits: NONE_BITS & Self::mask(len),
            len: len as u8,
        }
    }

    pub fn from_entries(entries: &[Entry]) -> History {
        assert!((1..=MAX_WINDOW as usize).contains(&entries.len()));
        let mut bits = 0;
        for (i, e) in entries.iter().enumerate() {
            bits |= e.code() << (2 * i);
        }
        History {
            bits,
            len: entries.len() as u8,
        }
    }

    pub fn len(&self) -> u32 {
        self.len as u32
    }

    /// Entry at position `i`, where 0 is the newest move.
    pub fn entry(&self, i: u32) -> Entry {
        debug_assert!(i < self.len());
        Entry::from_code((self.bits >> (2 * i)) & 0b11)
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        (0..self.len()).map(|i| self.entry(i))
    }

    /// Records one more Ego move: prepends `e` as the newest entry and drops
    /// the oldest.
    pub fn shifted(&self, e: Entry) -> History {
        History {
            bits: ((self.bits << 2) | e.code()) & Self::mask(self.len()),
            len: self.len,
        }
    }

    /// The same history under a window one shorter: the oldest entry removed.
    /// Callers must ensure `len() >= 2`.
    pub fn drop_oldest(&self) -> History {
        debug_assert!(self.len() >= 2);
        History {
            bits: self.bits & Self::mask(self.len() - 1),
            len: self.len - 1,
        }
    }

    pub fn hit_count(&self) -> u32 {
        (self.bits & HIT_BITS).count_ones()
    }

    pub fn none_count(&self) -> u32 {
        (self.bits & NONE_BITS).count_ones()
    }

    pub fn has_none(&self) -> bool {
        self.bits & NONE_BITS != 0
    }

    /// True when None entries are confined to a contiguous oldest suffix —
    /// an invariant of every history produced by shifting from `all_none`.
    pub fn is_well_formed(&self) -> bool {
        let mut seen_none = false;
        for e in self.entries() {
            match e {
                Entry::None => seen_none = true,
                _ if seen_none => return false,
                _ => {}
            }
        }
        true
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.entries() {
            write!(f, "{}", e.glyph())?;
        }
        Ok(())
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "History({self})")
    }
}

/// One history per constraint of a set, in constraint order. Inline capacity
/// two keeps typical situations allocation-free.
pub type HistoryVec = SmallVec<[History; 2]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// At least `bound` occurrences per window.
    Min,
    /// At most `bound` occurrences per window.
    Max,
}

/// A window counting constraint on Ego's moves: action `action` must occur at
/// least (Min) or at most (Max) `bound` times in every window of exactly
/// `window` consecutive Ego moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CountingConstraint {
    pub kind: ConstraintKind,
    pub action: ActionId,
    pub bound: u32,
    pub window: u32,
}

impl CountingConstraint {
    pub fn new(
        kind: ConstraintKind,
        action: ActionId,
        bound: u32,
        window: u32,
    ) -> Result<CountingConstraint, ConstraintError> {
        if !(1..=MAX_WINDOW).contains(&window) {
            return Err(ConstraintError::WindowOutOfRange(window));
        }
        if bound > window {
            return Err(ConstraintError::BoundExceedsWindow { bound, window });
        }
        Ok(CountingConstraint {
            kind,
            action,
            bound,
            window,
        })
    }

    pub fn min(action: ActionId, bound: u32, window: u32) -> Result<CountingConstraint, ConstraintError> {
        Self::new(ConstraintKind::Min, action, bound, window)
    }

    pub fn max(action: ActionId, bound: u32, window: u32) -> Result<CountingConstraint, ConstraintError> {
        Self::new(ConstraintKind::Max, action, bound, window)
    }

    /// Classifies an Ego move for this constraint's history.
    pub fn classify(&self, action: ActionId) -> Entry {
        if action == self.action {
            Entry::Hit
        } else {
            Entry::Miss
        }
    }

    /// Whether a full-length history satisfies this constraint. A history
    /// with None entries trivially satisfies a Min constraint (the window is
    /// not yet complete); for Max, None simply counts as a non-occurrence.
    pub(crate) fn holds(&self, h: &History) -> bool {
        debug_assert_eq!(h.len(), self.window);
        match self.kind {
            ConstraintKind::Min => h.has_none() || h.hit_count() >= self.bound,
            ConstraintKind::Max => h.hit_count() <= self.bound,
        }
    }
}

/// Errors building or evaluating constraints.
#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("window length {0} out of range (1..={MAX_WINDOW})")]
    WindowOutOfRange(u32),
    #[error("bound {bound} exceeds window length {window}")]
    BoundExceedsWindow { bound: u32, window: u32 },
    #[error("constraint action {0:?} is not an ego action of this game")]
    NotAnEgoAction(String),
    #[error("history length {len} does not match constraint window {window}")]
    LengthMismatch { len: u32, window: u32 },
    #[error(transparent)]
    Prefix(#[from] GameError),
}

/// An ordered set of counting constraints validated against one game: every
/// constrained action belongs to the game's Ego alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    constraints: Vec<CountingConstraint>,
}

impl ConstraintSet {
    pub fn new(
        graph: &GameGraph,
        constraints: Vec<CountingConstraint>,
    ) -> Result<ConstraintSet, ConstraintError> {
        for c in &constraints {
            if c.action.0 as usize >= graph.action_count()
                || graph.action_owner(c.action) != Player::Ego
            {
                let name = if (c.action.0 as usize) < graph.action_count() {
                    graph.action_name(c.action).to_string()
                } else {
                    format!("{:?}", c.action)
                };
                return Err(ConstraintError::NotAnEgoAction(name));
            }
        }
        Ok(ConstraintSet { constraints })
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn get(&self, i: usize) -> &CountingConstraint {
        &self.constraints[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CountingConstraint> {
        self.constraints.iter()
    }

    /// A copy of the set with constraint `index` evaluated under a different
    /// window length — the shortened iterates of the iterated solver.
    pub fn with_window(&self, index: usize, window: u32) -> ConstraintSet {
        let mut constraints = self.constraints.clone();
        debug_assert!(window >= 1 && window <= constraints[index].window);
        constraints[index].window = window;
        ConstraintSet { constraints }
    }

    /// Histories before any Ego move: all None, one per constraint.
    pub fn initial_histories(&self) -> HistoryVec {
        self.constraints.iter().map(|c| History::all_none(c.window)).collect()
    }
}

/// Applies one Ego move to a history tracked for `c`.
pub fn history_shift(
    h: &History,
    c: &CountingConstraint,
    action: ActionId,
) -> Result<History, ConstraintError> {
    if h.len() != c.window {
        return Err(ConstraintError::LengthMismatch {
            len: h.len(),
            window: c.window,
        });
    }
    Ok(h.shifted(c.classify(action)))
}

/// Whether a history satisfies its constraint (see
/// [`CountingConstraint::holds`] for the None conventions).
pub fn history_satisfies(h: &History, c: &CountingConstraint) -> Result<bool, ConstraintError> {
    if h.len() != c.window {
        return Err(ConstraintError::LengthMismatch {
            len: h.len(),
            window: c.window,
        });
    }
    Ok(c.holds(h))
}

/// Whether a play prefix satisfies every constraint on all *complete* windows
/// of Ego moves it contains. Prefixes too short to complete a window pass
/// trivially; in particular the empty prefix always satisfies.
///
/// `horizon` limits how many Ego moves are considered (all of them if `None`).
pub fn play_satisfies(
    graph: &GameGraph,
    prefix: &PlayPrefix,
    cs: &ConstraintSet,
    horizon: Option<usize>,
) -> Result<bool, ConstraintError> {
    prefix.check_on(graph)?;
    let mut ego_moves: Vec<ActionId> = prefix
        .states()
        .iter()
        .zip(prefix.actions())
        .filter(|&(&s, _)| graph.owner(s) == Player::Ego)
        .map(|(_, &a)| a)
        .collect();
    if let Some(h) = horizon {
        ego_moves.truncate(h);
    }
    for c in cs.iter() {
        let l = c.window as usize;
        if ego_moves.len() < l {
            continue;
        }
        for w in ego_moves.windows(l) {
            let hits = w.iter().filter(|&&a| a == c.action).count() as u32;
            let ok = match c.kind {
                ConstraintKind::Min => hits >= c.bound,
                ConstraintKind::Max => hits <= c.bound,
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

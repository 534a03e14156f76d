//! Solver for two-player games with counting constraints over sliding
//! windows of the controller's own moves.
//!
//! A game is played on a finite graph whose states belong alternately to the
//! controller (Ego) and the environment (Alter). A counting constraint fixes
//! an Ego action and demands that among every window of consecutive Ego
//! moves, the number that use this action stays above a minimum or below a
//! maximum. The solver answers whether Ego can enforce all constraints
//! forever, and if so produces a finite-memory strategy.
//!
//! The crate is organized bottom-up:
//!
//! * [`game`] — game graphs, validation, parsing, play prefixes;
//! * [`constraints`] — packed move histories and counting constraints;
//! * [`situation`] — the product of states and histories, with pruning;
//! * [`solver`] — safety fixpoint, strategy extraction and verification,
//!   and the iterated drivers that grow one window until the verdict flips;
//! * [`oracle`] — independent brute-force re-implementations for testing;
//! * [`bench`] — generated game families and an iterated-vs-direct harness;
//! * [`cli`] — the `wincount` command-line interface.

pub mod bench;
pub mod cli;
pub mod constraints;
pub mod game;
pub mod oracle;
pub mod situation;
pub mod solver;

#[cfg(test)]
pub(crate) mod testgames;

pub use constraints::{ConstraintKind, ConstraintSet, CountingConstraint, History};
pub use game::{GameGraph, Player, ValidationReport};
pub use situation::{Situation, SituationGraph};
pub use solver::{SolveReport, Verdict, WinningStrategy};

//! Shared fixtures for unit tests: the ten-state reference game used across
//! modules, plus shorthand builders for small handcrafted games.

use crate::game::{parse_game, GameGraph, Player};

pub(crate) const REFERENCE: &str = include_str!("../tests/data/reference.game.json");

/// The ten-state reference game (alternating cycle structure, Ego alphabet
/// {a, not_a}, Alter alphabet {b, not_b}).
pub(crate) fn reference() -> GameGraph {
    parse_game(REFERENCE).expect("reference game fixture must parse")
}

pub(crate) fn reference_states() -> Vec<(String, Player)> {
    (1..=10)
        .map(|i| {
            let owner = if i % 2 == 1 { Player::Ego } else { Player::Alter };
            (i.to_string(), owner)
        })
        .collect()
}

pub(crate) fn reference_transitions() -> Vec<(String, String, String)> {
    [
        ("1", "not_a", "2"),
        ("2", "b", "3"),
        ("2", "not_b", "7"),
        ("3", "not_a", "4"),
        ("4", "b", "5"),
        ("5", "a", "6"),
        ("6", "b", "3"),
        ("7", "a", "8"),
        ("8", "b", "9"),
        ("9", "a", "8"),
        ("9", "not_a", "10"),
        ("10", "b", "5"),
    ]
    .into_iter()
    .map(|(s, a, d)| (s.to_string(), a.to_string(), d.to_string()))
    .collect()
}

/// The reference game with its transition list replaced, assembled without
/// validation so structural defects can be probed.
pub(crate) fn reference_variant(transitions: Vec<(String, String, String)>) -> GameGraph {
    GameGraph::assemble(
        reference_states(),
        "1",
        vec!["a".into(), "not_a".into()],
        vec!["b".into(), "not_b".into()],
        transitions,
    )
    .expect("variant must assemble")
}

/// Builds and validates a small game from string literals.
pub(crate) fn build(
    states: &[(&str, Player)],
    initial: &str,
    ego: &[&str],
    alter: &[&str],
    transitions: &[(&str, &str, &str)],
) -> GameGraph {
    GameGraph::new(
        states.iter().map(|&(n, o)| (n.to_string(), o)).collect(),
        initial,
        ego.iter().map(|s| s.to_string()).collect(),
        alter.iter().map(|s| s.to_string()).collect(),
        transitions
            .iter()
            .map(|&(s, a, d)| (s.to_string(), a.to_string(), d.to_string()))
            .collect(),
    )
    .expect("test game must be valid")
}

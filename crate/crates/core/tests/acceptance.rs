//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with its measurements (visible with `cargo test -- --nocapture`).
//!
//! The criteria pin down the known worked example exactly, check the solver
//! against both brute-force oracles and the monotony/pruning guarantees on
//! hundreds of seeded random games, verify every produced strategy by
//! bounded play, reproduce the iterated-versus-direct size gap on a large
//! grid instance, show that game validation catches every single-condition
//! mutation, and confirm byte-level determinism of the CLI outputs.

use std::process::Command;
use std::time::{Duration, Instant};

use wincount::bench::{compare, generate, BenchSpec, CompareOptions, Family};
use wincount::constraints::{
    ConstraintKind, ConstraintSet, CountingConstraint, Entry, History, HistoryVec,
};
use wincount::game::{parse_game, serialize_game, GameFileError, GameGraph, ViolationKind};
use wincount::oracle::{default_enumeration_depth, triple_check, OracleConfig};
use wincount::situation::Situation;
use wincount::solver::{
    iterate_max, iterate_min, solve_direct, verify_strategy, SolveReport, Verdict,
};

const REFERENCE: &str = include_str!("data/reference.game.json");

fn reference_instance(bound: u32, window: u32) -> (GameGraph, ConstraintSet) {
    let g = parse_game(REFERENCE).unwrap();
    let a = g.find_action("a").unwrap();
    let cs =
        ConstraintSet::new(&g, vec![CountingConstraint::min(a, bound, window).unwrap()]).unwrap();
    (g, cs)
}

/// A small random bipartite game, 2–8 states, derived deterministically from
/// the seed.
fn small_game(seed: u64) -> GameGraph {
    generate(&BenchSpec {
        family: Family::RandomBipartite {
            states: 2 + (seed % 7) as u32,
            branching: 1 + (seed % 3) as u32,
        },
        seed,
    })
    .unwrap()
}

/// A single constraint on the distinguished action `a`, window 1–4, bound
/// derived from the seed (minimum: 1..=window, maximum: 0..=window).
fn small_constraint(g: &GameGraph, seed: u64, kind: ConstraintKind) -> ConstraintSet {
    let a = g.find_action("a").unwrap();
    let window = 1 + (seed % 4) as u32;
    let bound = match kind {
        ConstraintKind::Min => 1 + (seed / 5 % window as u64) as u32,
        ConstraintKind::Max => (seed / 7 % (window as u64 + 1)) as u32,
    };
    let c = CountingConstraint::new(kind, a, bound, window).unwrap();
    ConstraintSet::new(g, vec![c]).unwrap()
}

fn single_history(entries: &[Entry]) -> HistoryVec {
    std::iter::once(History::from_entries(entries)).collect()
}

/// Verdicts of the direct construction at every window the iterated driver
/// would visit, in ascending order.
fn direct_window_verdicts(g: &GameGraph, cs: &ConstraintSet) -> Vec<(u32, Verdict)> {
    let c = cs.get(0);
    (c.bound.max(1)..=c.window)
        .map(|w| {
            let verdict = solve_direct(g, &cs.with_window(0, w), None, None)
                .unwrap()
                .verdict;
            (w, verdict)
        })
        .collect()
}

#[test]
fn criterion_1_reference_game_golden_counts() {
    let start = Instant::now();
    let (g, cs) = reference_instance(1, 7);
    let report = iterate_min(&g, &cs, 0, None, None, None).unwrap();

    assert_eq!(report.verdict, Verdict::Win);
    assert_eq!(report.final_window, Some(3));
    assert_eq!(report.iterations.len(), 3);

    let it = &report.iterations;
    assert_eq!((it[0].window, it[0].situations, it[0].winning), (1, 2, 0));
    assert_eq!((it[1].window, it[1].situations, it[1].winning), (2, 14, 10));
    assert_eq!((it[2].window, it[2].situations), (3, 7));

    // The iteration continued past window 2, so the window-2 initial
    // situation must be losing despite its 10 winning situations.
    let at_two = solve_direct(&g, &cs.with_window(0, 2), None, None).unwrap();
    assert_eq!(at_two.verdict, Verdict::Lose);

    // The winning window-3 graph is cut at two marked situations whose
    // shortened histories were winning in the previous iteration.
    let ws = report.strategy.as_ref().unwrap();
    assert!(ws.region.is_winning(ws.graph.initial()));
    use Entry::{Hit, Miss, None as Gap};
    for (state, entries) in [("7", [Miss, Gap, Gap]), ("6", [Hit, Miss, Miss])] {
        let sit = Situation {
            state: g.find_state(state).unwrap(),
            histories: single_history(&entries),
        };
        let id = ws.graph.find(&sit).unwrap_or_else(|| panic!("{state} mark missing"));
        assert!(ws.graph.is_winnable_mark(id), "{state} should be a mark");
    }
    assert_eq!(ws.graph.winnable_marks().len(), 2);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 1 (reference-game golden counts): PASS ({elapsed:.1?})");
}

#[test]
fn criterion_2_triple_oracle_agreement() {
    let start = Instant::now();
    let config = OracleConfig::default();
    let mut checked = 0u32;
    for seed in 0..260 {
        for kind in [ConstraintKind::Min, ConstraintKind::Max] {
            let g = small_game(seed);
            let cs = small_constraint(&g, seed, kind);
            let depth = default_enumeration_depth(&cs);
            let check = triple_check(&g, &cs, depth, &config).unwrap();
            assert!(
                check.all_agree(),
                "seed {seed} {kind:?} (states {}, constraint {:?}): {check:?}",
                g.state_count(),
                cs.get(0),
            );
            checked += 1;
        }
    }
    assert!(checked >= 500);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!("criterion 2 (solver/fixpoint/enumeration agreement on {checked} instances): PASS ({elapsed:.1?})");
}

#[test]
fn criterion_3_verdict_monotony_in_the_window() {
    let start = Instant::now();
    let mut games = 0u32;
    for seed in 0..250 {
        let g = small_game(seed);

        // Minimum: once winning at some window, winning at every longer one.
        let cs = small_constraint(&g, seed, ConstraintKind::Min);
        let verdicts = direct_window_verdicts(&g, &cs);
        for pair in verdicts.windows(2) {
            assert!(
                !(pair[0].1 == Verdict::Win && pair[1].1 == Verdict::Lose),
                "seed {seed} min: win at window {} but lose at {}",
                pair[0].0,
                pair[1].0,
            );
        }

        // Maximum: once losing at some window, losing at every longer one.
        let cs = small_constraint(&g, seed, ConstraintKind::Max);
        let verdicts = direct_window_verdicts(&g, &cs);
        for pair in verdicts.windows(2) {
            assert!(
                !(pair[0].1 == Verdict::Lose && pair[1].1 == Verdict::Win),
                "seed {seed} max: lose at window {} but win at {}",
                pair[0].0,
                pair[1].0,
            );
        }
        games += 1;
    }
    assert!(games >= 200);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!("criterion 3 (window monotony, both kinds, {games} games): PASS ({elapsed:.1?})");
}

#[test]
fn criterion_4_pruning_changes_nothing_about_verdicts() {
    let start = Instant::now();

    let check = |g: &GameGraph, cs: &ConstraintSet, label: &str| {
        let iterated = iterate_min(g, cs, 0, None, None, None).unwrap();
        let per_window = direct_window_verdicts(g, cs);
        match per_window.iter().find(|&&(_, v)| v == Verdict::Win) {
            Some(&(first_win, _)) => {
                assert_eq!(iterated.verdict, Verdict::Win, "{label}");
                assert_eq!(iterated.final_window, Some(first_win), "{label}");
            }
            None => assert_eq!(iterated.verdict, Verdict::Lose, "{label}"),
        }
    };

    let (g, cs) = reference_instance(1, 7);
    check(&g, &cs, "reference game");

    let mut games = 0u32;
    for seed in 0..250 {
        let g = small_game(seed);
        let cs = small_constraint(&g, seed, ConstraintKind::Min);
        check(&g, &cs, &format!("seed {seed}"));
        games += 1;
    }
    assert!(games >= 200);

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!("criterion 4 (iterated verdicts match per-window direct solves, {games} games): PASS ({elapsed:.1?})");
}

#[test]
fn criterion_5_every_winning_strategy_verifies() {
    let start = Instant::now();
    let mut verified = 0u32;

    let mut verify_win = |g: &GameGraph, cs: &ConstraintSet, report: &SolveReport, label: &str| {
        if let Some(ws) = &report.strategy {
            let depth = 4 * cs.get(0).window;
            let ok = verify_strategy(g, cs, ws, depth)
                .unwrap_or_else(|e| panic!("{label}: verification error: {e}"));
            assert!(ok, "{label}: strategy loses within {depth} moves");
            verified += 1;
        }
    };

    // The worked example's iterated win, verified at four full windows —
    // this exercises the cross-iteration expansion of marked situations.
    let (g, cs) = reference_instance(1, 7);
    let report = iterate_min(&g, &cs, 0, None, None, None).unwrap();
    verify_win(&g, &cs, &report, "reference game");

    // All wins over the same instance family the agreement and monotony
    // criteria sample: iterated and direct, minimum and maximum.
    for seed in 0..250 {
        let g = small_game(seed);
        for kind in [ConstraintKind::Min, ConstraintKind::Max] {
            let cs = small_constraint(&g, seed, kind);
            let report = match kind {
                ConstraintKind::Min => iterate_min(&g, &cs, 0, None, None, None).unwrap(),
                ConstraintKind::Max => iterate_max(&g, &cs, 0, None, None).unwrap(),
            };
            verify_win(&g, &cs, &report, &format!("seed {seed} {kind:?} iterated"));

            let report = solve_direct(&g, &cs, None, None).unwrap();
            verify_win(&g, &cs, &report, &format!("seed {seed} {kind:?} direct"));
        }
    }
    assert!(verified >= 100, "only {verified} wins sampled");

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!("criterion 5 (bounded-play verification of {verified} winning strategies): PASS ({elapsed:.1?})");
}

#[test]
fn criterion_6_iterated_solving_beats_direct_on_a_large_grid() {
    let start = Instant::now();
    let g = generate(&BenchSpec {
        family: Family::Grid {
            width: 160,
            height: 160,
            chargers: 800,
        },
        seed: 10,
    })
    .unwrap();
    assert!(g.state_count() >= 50_000, "instance too small");

    let charge = g.find_action("charge").unwrap();
    let cs =
        ConstraintSet::new(&g, vec![CountingConstraint::min(charge, 2, 10).unwrap()]).unwrap();

    let options = CompareOptions {
        run_full_direct: false,
        ..CompareOptions::default()
    };
    let report = compare(&g, &cs, 0, &options, None).unwrap();

    assert!(report.verdicts_agree, "{report:?}");
    let iterated = &report.arms[0];
    let direct = &report.arms[1];
    assert_eq!(iterated.verdict, Some(Verdict::Win));
    let winning_window = iterated.final_window.unwrap();
    assert!(winning_window < 10, "needs the full window, no room to iterate");
    assert_eq!(report.iterated_peak_below_direct, Some(true));

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    println!(
        "criterion 6 (grid with {} states: win at window {winning_window}, iterated peak {} vs direct {} situations, direct/iterated wall {} ms / {} ms): PASS ({elapsed:.1?})",
        g.state_count(),
        iterated.peak_situations,
        direct.peak_situations,
        direct.wall_ms,
        iterated.wall_ms,
    );
}

// ---------------------------------------------------------- criterion 7

/// The five single-condition mutations, each mapping to exactly one
/// violation kind.
const MUTATIONS: [ViolationKind; 5] = [
    ViolationKind::Bipartition,
    ViolationKind::Deadlock,
    ViolationKind::AlphabetRestriction,
    ViolationKind::Determinacy,
    ViolationKind::InitialOwner,
];

/// Applies one mutation to a serialized valid game, returning the mutated
/// JSON. `pick` selects which state/transition is hit.
fn mutate_game(doc: &serde_json::Value, kind: ViolationKind, pick: usize) -> serde_json::Value {
    let mut doc = doc.clone();
    let owner_of = |doc: &serde_json::Value, name: &str| -> String {
        doc["states"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["name"] == name)
            .unwrap()["owner"]
            .as_str()
            .unwrap()
            .to_string()
    };

    match kind {
        ViolationKind::Bipartition => {
            // Retarget one transition onto its own source: a same-side edge.
            let transitions = doc["transitions"].as_array_mut().unwrap();
            let i = pick % transitions.len();
            let src = transitions[i][0].clone();
            transitions[i][2] = src;
        }
        ViolationKind::Deadlock => {
            // Strip every outgoing transition of one state.
            let states = doc["states"].as_array().unwrap();
            let victim = states[pick % states.len()]["name"].clone();
            let transitions = doc["transitions"].as_array_mut().unwrap();
            transitions.retain(|t| t[0] != victim);
        }
        ViolationKind::AlphabetRestriction => {
            // Relabel one Ego-owned transition with an Alter action.
            let ego_sources: Vec<usize> = doc["transitions"]
                .as_array()
                .unwrap()
                .iter()
                .enumerate()
                .filter(|(_, t)| owner_of(&doc, t[0].as_str().unwrap()) == "ego")
                .map(|(i, _)| i)
                .collect();
            let i = ego_sources[pick % ego_sources.len()];
            let alter_action = doc["alter_actions"][0].clone();
            doc["transitions"][i][1] = alter_action;
        }
        ViolationKind::Determinacy => {
            // Add a second same-action transition to a different same-side
            // target, so only determinacy is violated.
            let transitions = doc["transitions"].as_array().unwrap().clone();
            let i = pick % transitions.len();
            let (src, action, dst) = (
                transitions[i][0].clone(),
                transitions[i][1].clone(),
                transitions[i][2].as_str().unwrap().to_string(),
            );
            let dst_owner = owner_of(&doc, &dst);
            let other = doc["states"]
                .as_array()
                .unwrap()
                .iter()
                .find(|s| s["owner"] == dst_owner.as_str() && s["name"] != dst.as_str())
                .expect("a second same-side state exists")["name"]
                .clone();
            doc["transitions"]
                .as_array_mut()
                .unwrap()
                .push(serde_json::json!([src, action, other]));
        }
        ViolationKind::InitialOwner => {
            let alter_state = doc["states"]
                .as_array()
                .unwrap()
                .iter()
                .find(|s| s["owner"] == "alter")
                .unwrap()["name"]
                .clone();
            doc["initial"] = alter_state;
        }
    }
    doc
}

#[test]
fn criterion_7_validation_detects_every_single_mutation() {
    let start = Instant::now();
    let mut games = 0u32;
    let mut detected = 0u32;
    let mut applied = 0u32;

    for seed in 0..100u64 {
        // Mix the three families; every game has at least two states per
        // side so each mutation stays a single-condition violation.
        let family = match seed % 3 {
            0 => Family::RandomBipartite {
                states: 4 + 2 * (seed % 4) as u32,
                branching: 1 + (seed % 3) as u32,
            },
            1 => Family::Grid {
                width: 2 + (seed % 3) as u32,
                height: 2,
                chargers: 1 + (seed % 2) as u32,
            },
            _ => Family::CycleChain {
                cycles: 1 + (seed % 3) as u32,
                cycle_length: 2 + (seed % 3) as u32,
            },
        };
        let g = generate(&BenchSpec { family, seed }).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&serialize_game(&g)).unwrap();
        games += 1;

        for kind in MUTATIONS {
            let mutated = mutate_game(&doc, kind, seed as usize);
            applied += 1;
            match parse_game(&mutated.to_string()) {
                Err(GameFileError::Validation(report)) if report.has(kind) => detected += 1,
                Err(other) => panic!("seed {seed} {kind:?}: wrong rejection: {other}"),
                Ok(_) => panic!("seed {seed} {kind:?}: mutation not detected"),
            }
        }
    }

    assert_eq!(games, 100);
    assert_eq!(detected, applied, "missed {} mutations", applied - detected);

    let elapsed = start.elapsed();
    println!("criterion 7 (game validation caught {detected}/{applied} seeded mutations): PASS ({elapsed:.1?})");
}

// ---------------------------------------------------------- criterion 8

#[test]
fn criterion_8_solve_outputs_are_byte_deterministic() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_wincount");
    let dir = std::env::temp_dir().join(format!("wincount-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    let reference = dir.join("reference.json");
    std::fs::write(&reference, REFERENCE).unwrap();
    let bipartite = dir.join("bipartite.json");
    std::fs::write(&bipartite, serialize_game(&small_game(17))).unwrap();

    let run = |game: &std::path::Path, constraint: &str, tag: &str| -> Vec<u8> {
        let strategy = dir.join(format!("{tag}-strategy.json"));
        let stats = dir.join(format!("{tag}-stats.json"));
        let dot = dir.join(format!("{tag}-graph.dot"));
        let status = Command::new(bin)
            .args(["--quiet", "solve", "--game"])
            .arg(game)
            .args(["--constraint", constraint, "--iterate-over", "0"])
            .arg("--strategy-out")
            .arg(&strategy)
            .arg("--stats-out")
            .arg(&stats)
            .arg("--dot-out")
            .arg(&dot)
            .status()
            .unwrap();
        let mut bytes = vec![status.code().unwrap() as u8];
        for path in [&strategy, &stats, &dot] {
            bytes.push(b'|');
            bytes.extend(std::fs::read(path).unwrap_or_default());
        }
        bytes
    };

    for (game, constraint, label) in [
        (&reference, "min:a:1:7", "reference"),
        (&bipartite, "min:a:1:3", "bipartite"),
    ] {
        let first = run(game, constraint, &format!("{label}-1"));
        let second = run(game, constraint, &format!("{label}-2"));
        assert!(!first.is_empty());
        assert_eq!(first, second, "{label}: outputs differ between runs");
    }

    let elapsed = start.elapsed();
    println!("criterion 8 (byte-identical solve outputs across runs): PASS ({elapsed:.1?})");
}

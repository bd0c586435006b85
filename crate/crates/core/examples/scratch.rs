//! Scratch probe for acceptance-suite sizing (not shipped; deleted before finishing).

use polyzero::game::{for_each_reachable, GameState, MinimaxSolver};
use polyzero::rng::{rng_for, Stream};
use polyzero::{
    evaluate_team_on_puzzle, generate_puzzles, run_search, train, GameSpec, Puzzle,
    PuzzleCriteria, PuzzleKind, SearchConfig, SplitMode, StartEntry, StartSampler,
    StartSamplerConfig, TabularParams, TrainConfig,
};
use rayon::prelude::*;
use std::collections::HashMap;
use std::time::Instant;

fn forced_len(
    state: &GameState,
    solver: &mut MinimaxSolver,
    memo: &mut HashMap<(u64, bool), u32>,
    minimizing: bool,
) -> u32 {
    if state.is_terminal() {
        return 0;
    }
    if let Some(&v) = memo.get(&(state.state_key(), minimizing)) {
        return v;
    }
    let optimal = solver.solve(state).optimal;
    let mut best = if minimizing { u32::MAX } else { 0 };
    for mv in optimal {
        let child = state.apply_move(mv).unwrap();
        let len = 1 + forced_len(&child, solver, memo, !minimizing);
        if minimizing {
            best = best.min(len);
        } else {
            best = best.max(len);
        }
    }
    memo.insert((state.state_key(), minimizing), best);
    best
}

fn pool_from(puzzles: &[Puzzle]) -> Vec<StartEntry> {
    puzzles
        .iter()
        .map(|p| StartEntry {
            state: p.position.clone(),
            family: p.family.clone(),
            line: p.principal_line(),
        })
        .collect()
}

fn solve_rate(
    puzzles: &[Puzzle],
    params: &polyzero::EvaluatorParams,
    n_players: usize,
    sims: usize,
    seed: u64,
) -> Vec<f64> {
    // Per-puzzle max over latents; mean returned per aggregate elsewhere.
    let config = SearchConfig {
        n_simulations: sims,
        ..SearchConfig::default()
    };
    puzzles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            evaluate_team_on_puzzle(p, params, n_players, &config, seed ^ (i as u64) << 20)
                .unwrap()
                .max_over_latents()
        })
        .collect()
}

fn main() {
    let t_all = Instant::now();
    // --- criterion 4 pass rate ---
    let spec = GameSpec::tictactoe();
    let mut solver = MinimaxSolver::new();
    let mut memo = HashMap::new();
    let mut subjects = Vec::new();
    for_each_reachable(&spec, |s| {
        if !s.is_terminal() && forced_len(s, &mut solver, &mut memo, true) <= 2 {
            subjects.push(s.clone());
        }
    });
    let optimal: Vec<_> = subjects
        .iter()
        .map(|s| solver.solve(s).optimal)
        .collect();
    let uniform = TabularParams::new(spec, 1);
    let config = SearchConfig {
        n_simulations: 10_000,
        ..SearchConfig::default()
    };
    let t0 = Instant::now();
    let hits: usize = subjects
        .par_iter()
        .zip(&optimal)
        .enumerate()
        .map(|(i, (s, opt))| {
            let mut rng = rng_for(0, Stream::Evaluation, i as u64);
            let r = run_search(s, 0, &uniform, None, &config, &mut rng).unwrap();
            usize::from(opt.contains(&r.best_move()))
        })
        .sum();
    println!(
        "criterion 4: {hits}/{} optimal = {:.4} ({:.1?})",
        subjects.len(),
        hits as f64 / subjects.len() as f64,
        t0.elapsed()
    );

    // --- criterion 11 probes ---
    let mut solver = MinimaxSolver::new();
    let criteria = PuzzleCriteria {
        kinds: vec![PuzzleKind::UniqueMultiStep],
        ..PuzzleCriteria::default()
    };
    let puzzles = generate_puzzles(&spec, &mut solver, None, &criteria).unwrap();
    let pool = pool_from(&puzzles);
    println!("ttt unique pool: {}", pool.len());

    let base = TrainConfig {
        game: spec,
        n_players: 1,
        total_steps: 4000,
        batch_size: 64,
        replay_capacity: 50_000,
        n_simulations: 32,
        arch: polyzero::EvalArch::Tabular,
        learning_rate: 0.05,
        seed: 11,
        checkpoint_interval: 1000,
        start: StartSamplerConfig {
            p_std: 0.5,
            include_intermediates: true,
            split: SplitMode::None,
            holdout_fraction: 0.0,
        },
        ..TrainConfig::default()
    };

    for (label, p_std) in [("puzzle-start", 0.5), ("standard-start", 1.0)] {
        let mut cfg = base.clone();
        cfg.start.p_std = p_std;
        let t0 = Instant::now();
        let report = train(&cfg, &pool).unwrap();
        let rates = solve_rate(&puzzles, &report.params, 1, 16, 777);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        println!(
            "c11a {label}: solve rate {mean:.4} (train {:.1?}, games {})",
            t0.elapsed(),
            report.games_played
        );
    }

    for (label, split) in [
        ("random-split", SplitMode::Random),
        ("family-split", SplitMode::HeldOutFamily),
    ] {
        let mut cfg = base.clone();
        cfg.start.split = split;
        cfg.start.holdout_fraction = 0.3;
        let sampler = StartSampler::new(&cfg.start, &pool, spec, cfg.seed).unwrap();
        let held: Vec<Puzzle> = sampler
            .held_out()
            .iter()
            .map(|e| {
                puzzles
                    .iter()
                    .find(|p| p.position.state_key() == e.state.state_key())
                    .unwrap()
                    .clone()
            })
            .collect();
        let report = train(&cfg, &pool).unwrap();
        let rates = solve_rate(&held, &report.params, 1, 16, 777);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        println!(
            "c11b {label}: held-out {} puzzles, solve rate {mean:.4}",
            held.len()
        );
    }
    println!("total {:.1?}", t_all.elapsed());
}

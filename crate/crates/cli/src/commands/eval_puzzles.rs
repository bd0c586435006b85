//! `polyzero eval-puzzles`: score a checkpoint's team on a puzzle file.
//!
//! Every puzzle is evaluated once per evaluation seed; each row of the
//! results CSV carries one agent's score — the individual players, the
//! sub-additive choice under the requested rule, and the max-over-latents
//! oracle. Summary rows per dataset report the across-seed mean and
//! standard deviation of the per-seed solve rates.

use std::collections::BTreeSet;
use std::fs;

use polyzero::evaluation::{evaluate_team_on_puzzle, SelectionRule};
use polyzero::rng::{subseed, Stream};
use polyzero::SearchConfig;

use super::{resolve_seed, usage, CliError, OutDir};
use crate::manifest::ExperimentManifest;
use crate::EvalPuzzlesArgs;

pub const RESULTS_HEADER: &str = "dataset,puzzle,agent,seed,score";

struct DetailRow {
    dataset: String,
    puzzle: String,
    agent: String,
    seed: usize,
    score: Option<f64>,
}

impl DetailRow {
    fn csv(&self) -> String {
        let score = match self.score {
            Some(s) => s.to_string(),
            None => "nan".to_string(),
        };
        format!(
            "{},{},{},{},{}",
            self.dataset, self.puzzle, self.agent, self.seed, score
        )
    }
}

pub fn run(args: EvalPuzzlesArgs, seed_flag: Option<u64>) -> Result<(), CliError> {
    let checkpoint = super::load_checkpoint(&args.checkpoint)?;
    let text = fs::read_to_string(&args.puzzles).map_err(|e| {
        usage(format!(
            "puzzle file '{}' is unreadable: {e}",
            args.puzzles.display()
        ))
    })?;
    let puzzles = polyzero::evaluation::parse_puzzles(&text)
        .map_err(|e| usage(format!("puzzle file '{}': {e}", args.puzzles.display())))?;
    if puzzles.is_empty() {
        return Err(usage(format!(
            "puzzle file '{}' contains no puzzles",
            args.puzzles.display()
        )));
    }
    let rule = SelectionRule::parse(&args.rule)
        .ok_or_else(|| usage(format!("unknown selection rule '{}'", args.rule)))?;
    if args.eval_seeds == 0 {
        return Err(usage("needs at least one evaluation seed"));
    }
    let seed = resolve_seed(seed_flag);
    let n_players = checkpoint.team.n_players();
    let search = SearchConfig {
        n_simulations: args.sims,
        ..SearchConfig::default()
    };

    let subadd_agent = format!("subadd-{}", rule.name());
    let mut rows: Vec<DetailRow> = Vec::new();
    let mut failures = 0usize;
    for (ip, puzzle) in puzzles.iter().enumerate() {
        let dataset = puzzle.kind().name().to_string();
        for s in 0..args.eval_seeds {
            let game_seed = subseed(
                seed,
                Stream::Evaluation,
                (s * puzzles.len() + ip) as u64,
            );
            let outcome =
                evaluate_team_on_puzzle(puzzle, &checkpoint.params, n_players, &search, game_seed)
                    .and_then(|r| {
                        let sub = r.subadditive(rule)?;
                        Ok((r.per_player.clone(), sub.1, r.max_over_latents()))
                    });
            match outcome {
                Ok((per_player, sub, max)) => {
                    for (j, score) in per_player.iter().enumerate() {
                        rows.push(DetailRow {
                            dataset: dataset.clone(),
                            puzzle: puzzle.id.clone(),
                            agent: format!("player{j}"),
                            seed: s,
                            score: Some(*score),
                        });
                    }
                    rows.push(DetailRow {
                        dataset: dataset.clone(),
                        puzzle: puzzle.id.clone(),
                        agent: subadd_agent.clone(),
                        seed: s,
                        score: Some(sub),
                    });
                    rows.push(DetailRow {
                        dataset: dataset.clone(),
                        puzzle: puzzle.id.clone(),
                        agent: "max".to_string(),
                        seed: s,
                        score: Some(max),
                    });
                }
                Err(e) => {
                    eprintln!("puzzle {}: {e}", puzzle.id);
                    failures += 1;
                    rows.push(DetailRow {
                        dataset: dataset.clone(),
                        puzzle: puzzle.id.clone(),
                        agent: "error".to_string(),
                        seed: s,
                        score: None,
                    });
                }
            }
        }
    }

    let mut agents: Vec<String> = (0..n_players).map(|j| format!("player{j}")).collect();
    agents.push(subadd_agent.clone());
    agents.push("max".to_string());
    let datasets: BTreeSet<String> = rows.iter().map(|r| r.dataset.clone()).collect();

    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    for dataset in &datasets {
        for agent in &agents {
            // One solve-rate sample per evaluation seed.
            let mut per_seed = Vec::with_capacity(args.eval_seeds);
            for s in 0..args.eval_seeds {
                let scores: Vec<f64> = rows
                    .iter()
                    .filter(|r| {
                        r.dataset == *dataset && r.agent == *agent && r.seed == s
                    })
                    .filter_map(|r| r.score)
                    .collect();
                if !scores.is_empty() {
                    per_seed.push(scores.iter().sum::<f64>() / scores.len() as f64);
                }
            }
            if per_seed.is_empty() {
                continue;
            }
            let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            let var = per_seed.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
                / per_seed.len() as f64;
            let std = var.sqrt();
            csv.push_str(&format!("{dataset},-,{agent},mean,{mean}\n"));
            csv.push_str(&format!("{dataset},-,{agent},std,{std}\n"));
            println!("{dataset} {agent}: {mean:.4} ± {std:.4}");
        }
    }

    let mut out = OutDir::create(&args.out)?;
    out.write("results.csv", &csv)?;
    let mut manifest = ExperimentManifest::new("eval-puzzles", seed);
    manifest.setting("checkpoint", args.checkpoint.display());
    manifest.setting("puzzles", args.puzzles.display());
    manifest.setting("rule", rule.name());
    manifest.setting("sims", args.sims);
    manifest.setting("eval_seeds", args.eval_seeds);
    out.finish(manifest)?;
    if failures > 0 {
        return Err(CliError::Runtime(format!(
            "{failures} puzzle evaluation(s) failed; see the error rows in results.csv"
        )));
    }
    Ok(())
}

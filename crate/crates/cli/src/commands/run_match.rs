//! `polyzero match`: pit one checkpoint's team against another checkpoint
//! from a sampled book of openings.
//!
//! Openings are random `--opening-plies`-ply playouts kept only when the
//! side to move is not already lost (an oracle check), so no cell of the
//! grid is decided before the first searched move. The summary mirrors a
//! matchup table: win rate and Elo for the team's player 0 alone, for the
//! leave-one-out sub-additive lookup, and for the max-over-latents oracle.

use std::collections::HashSet;

use rand::Rng;

use polyzero::evaluation::{
    leave_one_out_selection, matches_to_csv, play_match, winrate_to_elo, LookupRule, MatchConfig,
    MatchSet,
};
use polyzero::rng::{rng_for, Stream};
use polyzero::{position_to_line, GameState, MinimaxSolver};

use super::{resolve_seed, usage, CliError, OutDir};
use crate::manifest::ExperimentManifest;
use crate::MatchArgs;

pub const SUMMARY_HEADER: &str = "metric,player0,subadditive,max_over_latents";

/// Random non-lost openings after a fixed number of plies, deduplicated.
fn sample_openings(
    root: &GameState,
    count: usize,
    plies: usize,
    seed: u64,
    solver: &mut MinimaxSolver,
) -> Vec<GameState> {
    let mut openings = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let budget = count.max(1) * 200;
    for attempt in 0..budget {
        if openings.len() >= count {
            break;
        }
        let mut rng = rng_for(seed, Stream::StartPosition, attempt as u64);
        let mut state = root.clone();
        let mut alive = true;
        for _ in 0..plies {
            if state.is_terminal() {
                alive = false;
                break;
            }
            let legal = state.legal_moves();
            let mv = legal[rng.gen_range(0..legal.len())];
            state = state.apply_move(mv).expect("legal move applies");
        }
        if !alive || state.is_terminal() || !seen.insert(state.state_key()) {
            continue;
        }
        // The mover must not already be lost, or the games are noise.
        if solver.value(&state) >= 0 {
            openings.push(state);
        }
    }
    openings
}

fn elo_cell(winrate: f64) -> String {
    match winrate_to_elo(winrate) {
        Ok(elo) => format!("{elo:.2}"),
        // A clean sweep has no finite rating difference.
        Err(_) => "na".to_string(),
    }
}

fn summary_csv(set: &MatchSet, loo: Option<f64>) -> String {
    let p0 = MatchSet::score_to_winrate(set.mean_score_for_player(0));
    let max = MatchSet::score_to_winrate(set.max_over_latents_mean());
    let sub = loo.map(MatchSet::score_to_winrate);
    let sub_rate = match sub {
        Some(w) => format!("{w}"),
        None => "unavailable".to_string(),
    };
    let sub_elo = match sub {
        Some(w) => elo_cell(w),
        None => "unavailable".to_string(),
    };
    format!(
        "{SUMMARY_HEADER}\nwinrate,{p0},{sub_rate},{max}\nelo,{},{sub_elo},{}\n",
        elo_cell(p0),
        elo_cell(max),
    )
}

pub fn run(args: MatchArgs, seed_flag: Option<u64>) -> Result<(), CliError> {
    let team_ck = super::load_checkpoint(&args.checkpoint)?;
    let opp_ck = super::load_checkpoint(&args.opponent)?;
    if team_ck.params.spec() != opp_ck.params.spec() {
        return Err(usage(format!(
            "checkpoints play different games: {} vs {}",
            team_ck.params.game_name(),
            opp_ck.params.game_name()
        )));
    }
    if args.openings == 0 || args.match_seeds == 0 {
        return Err(usage("--openings and --match-seeds must be positive"));
    }
    let seed = resolve_seed(seed_flag);
    let spec = *team_ck.params.spec();
    let mut solver = MinimaxSolver::new();
    let root = GameState::initial(spec);
    let openings = sample_openings(&root, args.openings, args.opening_plies, seed, &mut solver);
    if openings.is_empty() {
        return Err(usage(format!(
            "no playable openings found at {} plies",
            args.opening_plies
        )));
    }

    let n_players = team_ck.team.n_players();
    let set = play_match(
        &team_ck.params,
        n_players,
        &opp_ck.params,
        &openings,
        &MatchConfig {
            n_simulations: args.sims,
            n_seeds: args.match_seeds,
            seed,
        },
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let loo = if args.match_seeds >= 2 {
        let report = leave_one_out_selection(&set, LookupRule::PAPER_GAP)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Some(report.mean_heldout_score)
    } else {
        println!("sub-additive lookup unavailable: needs at least 2 match seeds");
        None
    };

    let summary = summary_csv(&set, loo);
    print!("{summary}");

    let mut out = OutDir::create(&args.out)?;
    let book: String = openings
        .iter()
        .map(|o| position_to_line(o) + "\n")
        .collect();
    out.write("openings.txt", &book)?;
    out.write("matches.csv", &matches_to_csv(&set))?;
    out.write("summary.csv", &summary)?;
    let mut manifest = ExperimentManifest::new("match", seed);
    manifest.setting("checkpoint", args.checkpoint.display());
    manifest.setting("opponent", args.opponent.display());
    manifest.setting("openings", openings.len());
    manifest.setting("opening_plies", args.opening_plies);
    manifest.setting("match_seeds", args.match_seeds);
    manifest.setting("sims", args.sims);
    out.finish(manifest)
}

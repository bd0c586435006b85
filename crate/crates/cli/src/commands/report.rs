//! `polyzero report`: profile a checkpoint's team and export its league
//! state.
//!
//! Emits the occupancy tables (per-player means, across-player standard
//! deviations, centered offsets), the pooled payoff table the run
//! accumulated, and the interaction graphs a chosen matchmaker would
//! derive from those payoffs.

use polyzero::evaluation::{
    occupancy_centered_csv, occupancy_mean_csv, occupancy_report, occupancy_std_csv,
    OccupancyConfig,
};
use polyzero::league::MatchmakerKind;
use polyzero::training::{graphs_to_csv, payoffs_to_csv};
use polyzero::build_graphs;

use super::{resolve_seed, usage, CliError, OutDir};
use crate::manifest::ExperimentManifest;
use crate::ReportArgs;

pub fn run(args: ReportArgs, seed_flag: Option<u64>) -> Result<(), CliError> {
    let checkpoint = super::load_checkpoint(&args.checkpoint)?;
    let matchmaker = MatchmakerKind::parse(&args.matchmaker)
        .ok_or_else(|| usage(format!("unknown matchmaker '{}'", args.matchmaker)))?;
    let seed = resolve_seed(seed_flag);
    let spec = *checkpoint.params.spec();
    let report = occupancy_report(
        &checkpoint.team,
        &checkpoint.params,
        spec,
        &OccupancyConfig {
            n_games: args.games,
            n_simulations: args.sims,
            seed,
        },
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let graphs = build_graphs(matchmaker, &checkpoint.payoffs)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let n_players = checkpoint.team.n_players();
    println!(
        "profiled {n_players} player(s) of a {} team over {} games each",
        checkpoint.params.game_name(),
        args.games
    );
    let spread = report.std.iter().sum::<f64>() / report.std.len() as f64;
    println!("mean per-feature occupancy spread: {spread:.4}");
    println!(
        "evaluator conditions on {} latent(s); payoff table holds {} game(s)",
        checkpoint.params.n_players(),
        checkpoint.payoffs.total_games()
    );

    let mut out = OutDir::create(&args.out)?;
    out.write("occupancy_mean.csv", &occupancy_mean_csv(&report))?;
    out.write("occupancy_std.csv", &occupancy_std_csv(&report))?;
    out.write("occupancy_centered.csv", &occupancy_centered_csv(&report))?;
    out.write("payoffs.csv", &payoffs_to_csv(&checkpoint.payoffs))?;
    out.write("graphs.csv", &graphs_to_csv(&graphs))?;
    let mut manifest = ExperimentManifest::new("report", seed);
    manifest.setting("checkpoint", args.checkpoint.display());
    manifest.setting("games", args.games);
    manifest.setting("sims", args.sims);
    manifest.setting("matchmaker", matchmaker.name());
    out.finish(manifest)
}

//! `polyzero` — train, probe, and report on latent-conditioned self-play
//! teams over exactly solvable games.
//!
//! Six subcommands cover the experiment pipeline: `train` runs the
//! actor–learner loop from a config file, `gen-puzzles` distills the game
//! oracle into puzzle files, `eval-puzzles` scores a checkpoint's team on
//! them, `match` plays checkpoint against checkpoint from sampled
//! openings, `report` profiles a team's behavior, and `solve` asks the
//! oracle directly. Every command that writes files also writes a
//! manifest naming its inputs, its seed, and every artifact it produced;
//! rerunning a command with the same arguments reproduces every output
//! byte for byte.
//!
//! Exit codes: 0 success, 1 bad usage or config, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;

use commands::CliError;

#[derive(Parser)]
#[command(name = "polyzero", version, about = "Self-play teams on solved games")]
struct Cli {
    /// Cap the worker threads used for self-play and per-player search.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed; omitted, a random one is drawn and logged.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the training loop described by a config file.
    Train(TrainArgs),
    /// Score a checkpoint's team on a puzzle file.
    EvalPuzzles(EvalPuzzlesArgs),
    /// Play one checkpoint against another from sampled openings.
    Match(MatchArgs),
    /// Distill the oracle into a deterministic puzzle file.
    GenPuzzles(GenPuzzlesArgs),
    /// Emit occupancy and league tables for a checkpoint.
    Report(ReportArgs),
    /// Query the exact solver for one position.
    Solve(SolveArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Key-value config file; every field is validated before any work.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for checkpoints, metrics, and the manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalPuzzlesArgs {
    /// Run checkpoint holding the team to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Puzzle file to score against.
    #[arg(long)]
    puzzles: PathBuf,
    /// Sub-additive selection rule: visit, value, lcb, or gap.
    #[arg(long, default_value = "gap")]
    rule: String,
    #[arg(long, default_value_t = 100)]
    sims: usize,
    /// Independent evaluation seeds averaged in the summary.
    #[arg(long, default_value_t = 3)]
    eval_seeds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatchArgs {
    /// Checkpoint whose team takes the "team" side of every game.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Checkpoint whose player 0 takes the other side.
    #[arg(long)]
    opponent: PathBuf,
    /// Number of sampled openings.
    #[arg(long, default_value_t = 8)]
    openings: usize,
    /// Random plies per sampled opening.
    #[arg(long, default_value_t = 2)]
    opening_plies: usize,
    /// Games per (opening, color, player) cell.
    #[arg(long, default_value_t = 4)]
    match_seeds: usize,
    #[arg(long, default_value_t = 100)]
    sims: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenPuzzlesArgs {
    /// Game to scan: tictactoe or connect4.
    #[arg(long)]
    game: String,
    /// Comma list of kinds to keep: unique,multi-choice,value-threshold.
    #[arg(long, default_value = "unique,multi-choice,value-threshold")]
    kinds: String,
    #[arg(long, default_value_t = 2)]
    min_steps: usize,
    #[arg(long, default_value_t = 16)]
    max_steps: usize,
    /// Keep only puzzles whose root fools this checkpoint's greedy prior.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Cap per puzzle kind.
    #[arg(long)]
    max_per_kind: Option<usize>,
    /// Stop scanning below this ply depth.
    #[arg(long)]
    scan_depth: Option<u32>,
    /// Value-threshold acceptance band: 0.25 or 0.1.
    #[arg(long, default_value_t = 0.25)]
    threshold: f64,
    /// Fortress threat margin.
    #[arg(long, default_value_t = 1)]
    margin: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Greedy profiling games per player.
    #[arg(long, default_value_t = 100)]
    games: usize,
    #[arg(long, default_value_t = 32)]
    sims: usize,
    /// Matchmaker whose interaction graphs to export.
    #[arg(long, default_value = "psro-nash")]
    matchmaker: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Position line, e.g. "tictactoe XX.OO.... X".
    #[arg(long, conflicts_with = "game")]
    position: Option<String>,
    /// Solve a game's initial position: tictactoe or connect4.
    #[arg(long)]
    game: Option<String>,
    /// Optionally write the answer (and a manifest) here too.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(1);
        }
        // Only the first initialization can win; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let seed = cli.seed;
    let workers = cli.workers;
    let result = match cli.command {
        Command::Train(args) => commands::train::run(args, seed, workers),
        Command::EvalPuzzles(args) => commands::eval_puzzles::run(args, seed),
        Command::Match(args) => commands::run_match::run(args, seed),
        Command::GenPuzzles(args) => commands::gen_puzzles::run(args, seed),
        Command::Report(args) => commands::report::run(args, seed),
        Command::Solve(args) => commands::solve::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

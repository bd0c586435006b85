//! `polyzero gen-puzzles`: distill a solved game into a puzzle file.
//!
//! The scan is exhaustive breadth-first (bounded by `--scan-depth`) and
//! rng-free, so the same arguments always produce the same bytes. With
//! `--baseline` only positions whose best move the baseline's raw prior
//! gets wrong are kept.

use polyzero::evaluation::{generate_puzzles, puzzles_to_text, EvaluationError, PuzzleCriteria, PuzzleKind};
use polyzero::{Evaluate, MinimaxSolver};

use super::{parse_game, usage, CliError, OutDir};
use crate::manifest::ExperimentManifest;
use crate::GenPuzzlesArgs;

fn parse_kinds(list: &str) -> Result<Vec<PuzzleKind>, CliError> {
    let mut kinds = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = PuzzleKind::parse(name).ok_or_else(|| {
            usage(format!(
                "unknown puzzle kind '{name}' (expected unique, multi-choice, or value-threshold)"
            ))
        })?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(kinds)
}

pub fn run(args: GenPuzzlesArgs, seed_flag: Option<u64>) -> Result<(), CliError> {
    let spec = parse_game(&args.game)?;
    let kinds = parse_kinds(&args.kinds)?;
    let baseline_ck = match &args.baseline {
        Some(path) => Some(super::load_checkpoint(path)?),
        None => None,
    };
    let criteria = PuzzleCriteria {
        kinds,
        min_steps: args.min_steps,
        max_steps: args.max_steps,
        require_hardness: baseline_ck.is_some(),
        threat_margin: args.margin,
        threshold: args.threshold,
        max_per_kind: args.max_per_kind.unwrap_or(usize::MAX),
        max_scan_depth: args.scan_depth,
    };
    let mut solver = MinimaxSolver::new();
    let baseline = baseline_ck.as_ref().map(|c| &c.params as &dyn Evaluate);
    let puzzles = generate_puzzles(&spec, &mut solver, baseline, &criteria).map_err(|e| match e {
        EvaluationError::InvalidCriteria { .. } => usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;

    for kind in PuzzleKind::ALL {
        let count = puzzles.iter().filter(|p| p.kind() == kind).count();
        println!("{}: {count}", kind.name());
    }
    println!("total: {} (from {} solved positions)", puzzles.len(), solver.solved_positions());

    let mut out = OutDir::create(&args.out)?;
    out.write("puzzles.txt", &puzzles_to_text(&puzzles))?;
    // Generation never consumes randomness; the seed is logged only so
    // every manifest has the field.
    let mut manifest = ExperimentManifest::new("gen-puzzles", seed_flag.unwrap_or(0));
    manifest.setting("game", spec.name());
    manifest.setting("kinds", &args.kinds);
    manifest.setting("min_steps", args.min_steps);
    manifest.setting("max_steps", args.max_steps);
    manifest.setting("threshold", args.threshold);
    manifest.setting("margin", args.margin);
    if let Some(depth) = args.scan_depth {
        manifest.setting("scan_depth", depth);
    }
    if let Some(path) = &args.baseline {
        manifest.setting("baseline", path.display());
    }
    out.finish(manifest)
}

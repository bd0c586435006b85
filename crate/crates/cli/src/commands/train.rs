//! `polyzero train`: run the actor–learner loop from a config file.
//!
//! The config file fully determines the run; `--seed` and `--workers`
//! override the corresponding config fields when given. A checkpoint
//! bundle is written at every emission, metrics land in `metrics.csv`,
//! and the manifest embeds the resolved config so the run can be redone
//! from the output directory alone.

use std::fs;
use std::path::Path;

use polyzero::evaluation::parse_puzzles;
use polyzero::training::{
    metrics_to_csv, save_run_checkpoint, train_loop, StartEntry, TrainConfig,
};

use super::{usage, CliError, OutDir};
use crate::manifest::ExperimentManifest;
use crate::TrainArgs;

/// Turn a puzzle file into a start pool: each puzzle contributes its root
/// position, its family tag, and its principal line for intermediate
/// expansion.
fn load_start_pool(path: &Path) -> Result<Vec<StartEntry>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("start pool '{}' is unreadable: {e}", path.display())))?;
    let puzzles = parse_puzzles(&text)
        .map_err(|e| usage(format!("start pool '{}': {e}", path.display())))?;
    Ok(puzzles
        .iter()
        .map(|p| StartEntry {
            state: p.position.clone(),
            family: p.family.clone(),
            line: p.principal_line(),
        })
        .collect())
}

pub fn run(args: TrainArgs, seed: Option<u64>, workers: Option<usize>) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        usage(format!(
            "config file '{}' is unreadable: {e}",
            args.config.display()
        ))
    })?;
    let mut config = TrainConfig::from_text(&text).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(workers) = workers {
        config.workers = workers;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;

    let pool = match &config.start_pool_file {
        Some(file) => {
            // Relative pool paths count from the config file's directory.
            let base = args.config.parent().unwrap_or_else(|| Path::new("."));
            let path = Path::new(file);
            let resolved = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base.join(path)
            };
            load_start_pool(&resolved)?
        }
        None => Vec::new(),
    };

    let mut out = OutDir::create(&args.out)?;
    out.write("resolved-config.txt", &config.to_text())?;

    let report = {
        let out_ref = &mut out;
        train_loop(&config, &pool, |view| {
            let name = format!("checkpoint-{:08}.txt", view.step);
            let path = out_ref.path(&name);
            save_run_checkpoint(&path, view.step, view.params, view.team, view.payoffs)?;
            out_ref.record(&name);
            println!("checkpoint step {} -> {}", view.step, name);
            Ok(())
        })
        .map_err(|e| CliError::Runtime(e.to_string()))?
    };

    // The stable name downstream commands reach for.
    let final_path = out.path("checkpoint.txt");
    save_run_checkpoint(
        &final_path,
        config.total_steps,
        &report.params,
        &report.team,
        &report.payoffs,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    out.record("checkpoint.txt");
    out.write("metrics.csv", &metrics_to_csv(&report.metrics))?;

    if report.metrics.is_empty() {
        println!("no updates ran (buffer never reached a full batch)");
    } else {
        let stride = (report.metrics.len() / 10).max(1);
        for row in report.metrics.iter().step_by(stride) {
            println!(
                "step {} loss {:.4} (value {:.4} policy {:.4})",
                row.step, row.loss_total, row.loss_value, row.loss_policy
            );
        }
        let last = report.metrics.last().unwrap();
        println!("final step {} loss {:.4}", last.step, last.loss_total);
    }
    println!("games played: {}", report.games_played);
    for (step, hash) in &report.checkpoint_hashes {
        println!("fingerprint step {step}: {hash:016x}");
    }

    let mut manifest = ExperimentManifest::new("train", config.seed);
    manifest.setting("config", args.config.display());
    manifest.setting("workers", config.workers);
    manifest.config_snapshot(&config.to_text());
    out.finish(manifest)
}

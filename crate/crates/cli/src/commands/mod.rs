//! Shared plumbing for the subcommands: error-to-exit-code mapping, seed
//! resolution, output-directory bookkeeping, and checkpoint loading.

use std::fs;
use std::path::{Path, PathBuf};

use polyzero::training::{load_run_checkpoint, RunCheckpoint};
use polyzero::{GameError, GameSpec};

use crate::manifest::{ExperimentManifest, MANIFEST_FILE};

pub mod eval_puzzles;
pub mod gen_puzzles;
pub mod report;
pub mod run_match;
pub mod solve;
pub mod train;

/// Command failures, split by exit code: usage/config problems exit 1,
/// failures during execution exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub fn usage(message: impl ToString) -> CliError {
    CliError::Usage(message.to_string())
}

pub fn runtime(message: impl ToString) -> CliError {
    CliError::Runtime(message.to_string())
}

/// The seed that actually governs the run: the flag if given, otherwise a
/// freshly drawn one, logged so the run stays reproducible after the fact.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    match flag {
        Some(seed) => seed,
        None => {
            let seed: u64 = rand::random();
            eprintln!("no --seed given; drew {seed}");
            seed
        }
    }
}

/// An output directory plus the record of everything written into it.
/// `finish` seals the run by writing the manifest as the final artifact.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<OutDir, CliError> {
        fs::create_dir_all(path)
            .map_err(|e| runtime(format!("cannot create output directory '{}': {e}", path.display())))?;
        Ok(OutDir {
            root: path.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, content)
            .map_err(|e| runtime(format!("cannot write '{}': {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Record a file some other writer produced inside the directory.
    pub fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn finish(self, mut manifest: ExperimentManifest) -> Result<(), CliError> {
        for name in &self.written {
            manifest.output(name);
        }
        manifest.output(MANIFEST_FILE);
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_text())
            .map_err(|e| runtime(format!("cannot write '{}': {e}", path.display())))?;
        Ok(())
    }
}

/// Load a run checkpoint; failure is a usage error naming the path.
pub fn load_checkpoint(path: &Path) -> Result<RunCheckpoint, CliError> {
    load_run_checkpoint(path)
        .map_err(|e| usage(format!("checkpoint '{}' is unusable: {e}", path.display())))
}

pub fn parse_game(name: &str) -> Result<GameSpec, CliError> {
    GameSpec::from_name(name).map_err(|e: GameError| usage(e.to_string()))
}

//! The run manifest: one small file per command invocation recording what
//! was asked for, which seed actually governed, and every artifact the
//! command wrote. A manifest plus the inputs it names is enough to
//! reproduce the run byte for byte, so the file contains nothing
//! time-dependent.

use std::fmt::Write as _;

pub const MANIFEST_MAGIC: &str = "polyzero-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub struct ExperimentManifest {
    command: &'static str,
    version: &'static str,
    seed: u64,
    /// Resolved command settings, in insertion order.
    settings: Vec<(String, String)>,
    /// Full text of the governing config, when the command has one.
    config_snapshot: Option<String>,
    /// Files written to the output directory, in write order.
    outputs: Vec<String>,
}

impl ExperimentManifest {
    pub fn new(command: &'static str, seed: u64) -> ExperimentManifest {
        ExperimentManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            settings: Vec::new(),
            config_snapshot: None,
            outputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) {
        self.settings.push((key.to_string(), value.to_string()));
    }

    pub fn config_snapshot(&mut self, text: &str) {
        self.config_snapshot = Some(text.to_string());
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MANIFEST_MAGIC}\ncommand = {}\nversion = {}\nseed = {}\n",
            self.command, self.version, self.seed
        );
        for (key, value) in &self.settings {
            let _ = writeln!(out, "{key} = {value}");
        }
        if let Some(snapshot) = &self.config_snapshot {
            out.push_str("[config]\n");
            out.push_str(snapshot);
            if !snapshot.ends_with('\n') {
                out.push('\n');
            }
        }
        out.push_str("[outputs]\n");
        for name in &self.outputs {
            out.push_str(name);
            out.push('\n');
        }
        out
    }
}

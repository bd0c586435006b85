//! Parameter checkpoints: a versioned, line-oriented text format.
//!
//! Floats are written as 16-digit hex bit patterns, so save → load → evaluate
//! round-trips bitwise. The header carries the backend tag, game id, history
//! length, player count, and architecture dims; any mismatch between the
//! declared shapes and the payload is a load-time error naming the line.
//!
//! Selection-time knobs (temperature cutoffs, simulation budgets) are run
//! configuration, not parameters, and are deliberately not stored here.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::game::GameSpec;

use super::mlp::{Dense, MlpParams};
use super::tabular::{TabEntry, TabularParams};
use super::EvaluatorParams;

pub const CHECKPOINT_MAGIC: &str = "polyzero-checkpoint";
pub const CHECKPOINT_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported checkpoint version '{found}' (this build reads {expected})")]
    Version { found: String, expected: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn f64_to_hex(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

pub(crate) fn hex_to_f64(s: &str, line: usize) -> Result<f64, CheckpointError> {
    let bits = u64::from_str_radix(s, 16).map_err(|_| CheckpointError::Parse {
        line,
        reason: format!("invalid f64 hex '{s}'"),
    })?;
    Ok(f64::from_bits(bits))
}

pub(crate) fn hex_row(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 17);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&f64_to_hex(*v));
    }
    out
}

pub fn save_params(params: &EvaluatorParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    match params {
        EvaluatorParams::Tabular(t) => {
            let spec = t.spec();
            let _ = writeln!(out, "backend tabular");
            let _ = writeln!(out, "game {}", spec.name());
            let _ = writeln!(out, "history_len {}", spec.history_len);
            let _ = writeln!(out, "n_players {}", t.n_players());
            let _ = writeln!(out, "move_space {}", spec.move_space());
            let _ = writeln!(out, "entries {}", t.table.len());
            for ((key, latent), entry) in &t.table {
                let _ = writeln!(
                    out,
                    "entry {key:016x} {latent} {} {} {}",
                    hex_row(&entry.logits),
                    f64_to_hex(entry.v),
                    f64_to_hex(entry.v_d)
                );
            }
        }
        EvaluatorParams::Mlp(m) => {
            let spec = m.spec();
            let _ = writeln!(out, "backend mlp");
            let _ = writeln!(out, "game {}", spec.name());
            let _ = writeln!(out, "history_len {}", spec.history_len);
            let _ = writeln!(out, "n_players {}", m.n_players());
            let hidden: Vec<String> = m.hidden.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(out, "hidden {}", hidden.join(" "));
            for (name, d) in named_blocks(m) {
                let _ = writeln!(out, "tensor {name} {} {}", d.in_dim, d.out_dim);
                let _ = writeln!(out, "w {}", hex_row(&d.w));
                let _ = writeln!(out, "b {}", hex_row(&d.b));
            }
        }
    }
    let _ = writeln!(out, "end");
    out
}

fn named_blocks(m: &MlpParams) -> Vec<(String, &Dense)> {
    let mut blocks: Vec<(String, &Dense)> = m
        .torso
        .iter()
        .enumerate()
        .map(|(i, d)| (format!("torso.{i}"), d))
        .collect();
    blocks.push(("policy".to_string(), &m.policy));
    blocks.push(("value".to_string(), &m.value));
    blocks.push(("intrinsic".to_string(), &m.intrinsic));
    blocks
}

struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> LineReader<'a> {
        LineReader {
            lines: text.lines().enumerate(),
        }
    }

    /// Next non-empty line as (1-based number, content).
    fn next(&mut self) -> Result<(usize, &'a str), CheckpointError> {
        for (i, line) in self.lines.by_ref() {
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Ok((i + 1, trimmed));
            }
        }
        Err(CheckpointError::Parse {
            line: 0,
            reason: "unexpected end of checkpoint".to_string(),
        })
    }

    /// Next line, which must start with `key`; returns the remainder.
    fn expect(&mut self, key: &str) -> Result<(usize, &'a str), CheckpointError> {
        let (n, line) = self.next()?;
        match line.strip_prefix(key) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok((n, rest.trim())),
            _ => Err(CheckpointError::Parse {
                line: n,
                reason: format!("expected '{key} ...', found '{line}'"),
            }),
        }
    }
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize, CheckpointError> {
    s.parse().map_err(|_| CheckpointError::Parse {
        line,
        reason: format!("invalid {what} '{s}'"),
    })
}

pub fn load_params(text: &str) -> Result<EvaluatorParams, CheckpointError> {
    let mut r = LineReader::new(text);
    let (n, header) = r.next()?;
    let mut head = header.split_whitespace();
    if head.next() != Some(CHECKPOINT_MAGIC) {
        return Err(CheckpointError::Parse {
            line: n,
            reason: format!("not a parameter checkpoint: '{header}'"),
        });
    }
    let version = head.next().unwrap_or("").to_string();
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            found: version,
            expected: CHECKPOINT_VERSION.to_string(),
        });
    }
    let (bn, backend) = r.expect("backend")?;
    let (gn, game) = r.expect("game")?;
    let spec = GameSpec::from_name(game).map_err(|_| CheckpointError::Parse {
        line: gn,
        reason: format!("unknown game '{game}'"),
    })?;
    let (hn, hist) = r.expect("history_len")?;
    let spec = spec.with_history(parse_usize(hist, hn, "history_len")?);
    let (pn, players) = r.expect("n_players")?;
    let n_players = parse_usize(players, pn, "n_players")?;
    if n_players == 0 {
        return Err(CheckpointError::Parse {
            line: pn,
            reason: "n_players must be at least 1".to_string(),
        });
    }
    match backend {
        "tabular" => {
            let (mn, ms) = r.expect("move_space")?;
            let move_space = parse_usize(ms, mn, "move_space")?;
            if move_space != spec.move_space() {
                return Err(CheckpointError::Parse {
                    line: mn,
                    reason: format!(
                        "move_space {move_space} does not match {} for {game}",
                        spec.move_space()
                    ),
                });
            }
            let (en, entries) = r.expect("entries")?;
            let count = parse_usize(entries, en, "entry count")?;
            let mut params = TabularParams::new(spec, n_players);
            for _ in 0..count {
                let (ln, rest) = r.expect("entry")?;
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 2 + move_space + 2 {
                    return Err(CheckpointError::Parse {
                        line: ln,
                        reason: format!(
                            "entry has {} fields, expected {}",
                            fields.len(),
                            2 + move_space + 2
                        ),
                    });
                }
                let key = u64::from_str_radix(fields[0], 16).map_err(|_| {
                    CheckpointError::Parse {
                        line: ln,
                        reason: format!("invalid state key '{}'", fields[0]),
                    }
                })?;
                let latent = parse_usize(fields[1], ln, "latent")?;
                if latent >= n_players {
                    return Err(CheckpointError::Parse {
                        line: ln,
                        reason: format!("latent {latent} out of range for {n_players} players"),
                    });
                }
                let mut logits = Vec::with_capacity(move_space);
                for f in &fields[2..2 + move_space] {
                    logits.push(hex_to_f64(f, ln)?);
                }
                let v = hex_to_f64(fields[2 + move_space], ln)?;
                let v_d = hex_to_f64(fields[3 + move_space], ln)?;
                params.table.insert((key, latent), TabEntry { logits, v, v_d });
            }
            r.expect("end")?;
            Ok(EvaluatorParams::Tabular(params))
        }
        "mlp" => {
            let (hn, hidden_str) = r.expect("hidden")?;
            let mut hidden = Vec::new();
            for tok in hidden_str.split_whitespace() {
                hidden.push(parse_usize(tok, hn, "hidden width")?);
            }
            if hidden.is_empty() {
                return Err(CheckpointError::Parse {
                    line: hn,
                    reason: "empty hidden layer list".to_string(),
                });
            }
            // Build with the right shape, then overwrite every tensor.
            let mut net = MlpParams::new(spec, n_players, &hidden, 0);
            let expected: Vec<(String, (usize, usize))> = named_blocks(&net)
                .into_iter()
                .map(|(name, d)| (name, (d.in_dim, d.out_dim)))
                .collect();
            for (name, (in_dim, out_dim)) in expected {
                let (tn, tensor) = r.expect("tensor")?;
                let fields: Vec<&str> = tensor.split_whitespace().collect();
                if fields.len() != 3 || fields[0] != name {
                    return Err(CheckpointError::Parse {
                        line: tn,
                        reason: format!("expected tensor '{name}', found '{tensor}'"),
                    });
                }
                let fin = parse_usize(fields[1], tn, "in_dim")?;
                let fout = parse_usize(fields[2], tn, "out_dim")?;
                if (fin, fout) != (in_dim, out_dim) {
                    return Err(CheckpointError::Parse {
                        line: tn,
                        reason: format!(
                            "tensor {name} has shape {fin}x{fout}, expected {in_dim}x{out_dim}"
                        ),
                    });
                }
                let (wn, wrow) = r.expect("w")?;
                let w = parse_hex_row(wrow, wn, in_dim * out_dim, "weights")?;
                let (bn2, brow) = r.expect("b")?;
                let b = parse_hex_row(brow, bn2, out_dim, "biases")?;
                net.set_block(&name, w, b);
            }
            r.expect("end")?;
            Ok(EvaluatorParams::Mlp(net))
        }
        other => Err(CheckpointError::Parse {
            line: bn,
            reason: format!("unknown backend tag '{other}'"),
        }),
    }
}

fn parse_hex_row(
    row: &str,
    line: usize,
    expected: usize,
    what: &str,
) -> Result<Vec<f64>, CheckpointError> {
    let fields: Vec<&str> = row.split_whitespace().collect();
    if fields.len() != expected {
        return Err(CheckpointError::Parse {
            line,
            reason: format!("{what}: {} values, expected {expected}", fields.len()),
        });
    }
    fields.iter().map(|f| hex_to_f64(f, line)).collect()
}

pub fn save_params_to(params: &EvaluatorParams, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, save_params(params))?;
    Ok(())
}

pub fn load_params_from(path: &Path) -> Result<EvaluatorParams, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    load_params(&text)
}

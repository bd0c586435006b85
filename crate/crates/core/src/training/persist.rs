//! Run-level persistence: the checkpoint bundle and league CSV exports.
//!
//! A run checkpoint is one text file with a step line and three sections —
//! parameters (the evaluator's own bitwise format), team state (hex floats,
//! like parameters), and the payoff table (integer CSV). Loading it
//! restores training state exactly; interaction graphs are derived data and
//! are re-built from the payoffs, not stored.

use std::fs;
use std::path::Path;

use crate::diversity::TeamState;
use crate::evaluator::checkpoint::{f64_to_hex, hex_row, hex_to_f64};
use crate::evaluator::{load_params, save_params, CheckpointError, EvaluatorParams};
use crate::league::{InteractionGraph, LeagueGraphs, PayoffCell, PayoffTable};

use super::TrainError;

pub const RUN_MAGIC: &str = "polyzero-run";
pub const RUN_VERSION: &str = "v1";

fn parse_error(line: usize, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::Parse {
        line,
        reason: reason.into(),
    }
}

/// Serialize a team state with bitwise-exact floats.
pub fn team_to_text(team: &TeamState) -> String {
    let mut out = String::new();
    out.push_str(&format!("team {RUN_VERSION}\n"));
    out.push_str(&format!("players {}\n", team.n_players()));
    out.push_str(&format!("feature_dim {}\n", team.feature_dim()));
    out.push_str(&format!("ell0 {}\n", f64_to_hex(team.ell0())));
    out.push_str(&format!("beta {}\n", f64_to_hex(team.beta())));
    let lambdas: Vec<f64> = (0..team.n_players()).map(|i| team.lambda(i)).collect();
    out.push_str(&format!("lambda {}\n", hex_row(&lambdas)));
    for i in 0..team.n_players() {
        out.push_str(&format!("psi {} {}\n", i, hex_row(team.psi(i))));
    }
    out
}

/// Inverse of [`team_to_text`].
pub fn team_from_text(text: &str) -> Result<TeamState, CheckpointError> {
    let mut lines = text.lines().enumerate();
    let mut expect = |what: &str| -> Result<(usize, Vec<String>), CheckpointError> {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| parse_error(0, format!("missing '{what}' line")))?;
        let fields: Vec<String> = line.split_whitespace().map(String::from).collect();
        if fields.first().map(String::as_str) != Some(what) {
            return Err(parse_error(idx + 1, format!("expected '{what}' line")));
        }
        Ok((idx + 1, fields))
    };
    let (line, header) = expect("team")?;
    if header.get(1).map(String::as_str) != Some(RUN_VERSION) {
        return Err(parse_error(line, "unsupported team version"));
    }
    let int_field = |fields: &[String], line: usize| -> Result<usize, CheckpointError> {
        fields
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_error(line, "expected an integer"))
    };
    let (line, fields) = expect("players")?;
    let n_players = int_field(&fields, line)?;
    let (line, fields) = expect("feature_dim")?;
    let feature_dim = int_field(&fields, line)?;
    let hex_field = |fields: &[String], line: usize| -> Result<f64, CheckpointError> {
        hex_to_f64(
            fields
                .get(1)
                .ok_or_else(|| parse_error(line, "missing value"))?,
            line,
        )
    };
    let (line, fields) = expect("ell0")?;
    let ell0 = hex_field(&fields, line)?;
    let (line, fields) = expect("beta")?;
    let beta = hex_field(&fields, line)?;
    let (line, fields) = expect("lambda")?;
    if fields.len() != n_players + 1 {
        return Err(parse_error(line, "lambda row length mismatch"));
    }
    let mut lambdas = Vec::with_capacity(n_players);
    for s in &fields[1..] {
        lambdas.push(hex_to_f64(s, line)?);
    }

    let mut team = TeamState::new(n_players, feature_dim);
    let bad_param = |line: usize, e| parse_error(line, format!("invalid team parameter: {e}"));
    team.set_ell0(ell0).map_err(|e| bad_param(line, e))?;
    team.set_beta(beta).map_err(|e| bad_param(line, e))?;
    for (i, &l) in lambdas.iter().enumerate() {
        team.set_lambda_for(i, l).map_err(|e| bad_param(line, e))?;
    }
    for _ in 0..n_players {
        let (line, fields) = expect("psi")?;
        if fields.len() != feature_dim + 2 {
            return Err(parse_error(line, "psi row length mismatch"));
        }
        let i: usize = fields[1]
            .parse()
            .map_err(|_| parse_error(line, "bad psi player index"))?;
        let mut psi = Vec::with_capacity(feature_dim);
        for s in &fields[2..] {
            psi.push(hex_to_f64(s, line)?);
        }
        team.set_psi(i, psi).map_err(|e| bad_param(line, e))?;
    }
    Ok(team)
}

pub const PAYOFFS_HEADER: &str = "seat,exploiter,exploitee,wins,draws,losses";

/// Payoff table as integer CSV, every cell of both seat matrices.
pub fn payoffs_to_csv(payoffs: &PayoffTable) -> String {
    let n = payoffs.n_players();
    let mut out = String::from(PAYOFFS_HEADER);
    out.push('\n');
    for (seat, label) in [(true, "first"), (false, "second")] {
        for i in 0..n {
            for j in 0..n {
                let c = payoffs.cell(i, j, seat);
                out.push_str(&format!(
                    "{label},{i},{j},{},{},{}\n",
                    c.wins, c.draws, c.losses
                ));
            }
        }
    }
    out
}

/// Inverse of [`payoffs_to_csv`].
pub fn payoffs_from_csv(text: &str) -> Result<PayoffTable, CheckpointError> {
    let mut rows = Vec::new();
    let mut n = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if idx == 0 {
            if line != PAYOFFS_HEADER {
                return Err(parse_error(line_no, "bad payoff CSV header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_error(line_no, "expected 6 payoff columns"));
        }
        let seat = match fields[0] {
            "first" => true,
            "second" => false,
            other => return Err(parse_error(line_no, format!("bad seat '{other}'"))),
        };
        let mut ints = [0u64; 5];
        for (slot, s) in ints.iter_mut().zip(&fields[1..]) {
            *slot = s
                .parse()
                .map_err(|_| parse_error(line_no, format!("bad integer '{s}'")))?;
        }
        let [i, j, wins, draws, losses] = ints;
        n = n.max(i as usize + 1).max(j as usize + 1);
        rows.push((seat, i as usize, j as usize, PayoffCell { wins, draws, losses }));
    }
    let mut table = PayoffTable::new(n);
    for (seat, i, j, cell) in rows {
        table
            .set_cell(i, j, seat, cell)
            .map_err(|e| parse_error(0, format!("payoff cell: {e}")))?;
    }
    Ok(table)
}

pub const GRAPHS_HEADER: &str = "seat,exploiter,exploitee,probability";

/// Interaction graphs as long-form CSV (one probability per row).
pub fn graphs_to_csv(graphs: &LeagueGraphs) -> String {
    let mut out = String::from(GRAPHS_HEADER);
    out.push('\n');
    let mut emit = |label: &str, graph: &InteractionGraph| {
        for (i, row) in graph.rows.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                out.push_str(&format!("{label},{i},{j},{p}\n"));
            }
        }
    };
    emit("first", &graphs.exploiter_first);
    emit("second", &graphs.exploiter_second);
    out
}

/// A loaded run checkpoint.
#[derive(Clone, Debug)]
pub struct RunCheckpoint {
    pub step: u64,
    pub params: EvaluatorParams,
    pub team: TeamState,
    pub payoffs: PayoffTable,
}

/// Write one checkpoint bundle to `path`.
pub fn save_run_checkpoint(
    path: &Path,
    step: u64,
    params: &EvaluatorParams,
    team: &TeamState,
    payoffs: &PayoffTable,
) -> Result<(), TrainError> {
    let mut out = format!("{RUN_MAGIC} {RUN_VERSION}\nstep {step}\n");
    out.push_str("[params]\n");
    out.push_str(&save_params(params));
    out.push_str("[team]\n");
    out.push_str(&team_to_text(team));
    out.push_str("[payoffs]\n");
    out.push_str(&payoffs_to_csv(payoffs));
    fs::write(path, out)?;
    Ok(())
}

/// Read a checkpoint bundle back.
pub fn load_run_checkpoint(path: &Path) -> Result<RunCheckpoint, TrainError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty checkpoint"))?;
    if header != format!("{RUN_MAGIC} {RUN_VERSION}") {
        return Err(parse_error(1, format!("bad run checkpoint header '{header}'")).into());
    }
    let step_line = lines
        .next()
        .ok_or_else(|| parse_error(2, "missing step line"))?;
    let step: u64 = step_line
        .strip_prefix("step ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_error(2, format!("bad step line '{step_line}'")))?;

    let mut sections: Vec<(String, String)> = Vec::new();
    for line in lines {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push((name.to_string(), String::new()));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push_str(line);
            body.push('\n');
        } else if !line.trim().is_empty() {
            return Err(parse_error(3, "content before the first section").into());
        }
    }
    let section = |name: &str| -> Result<&str, CheckpointError> {
        sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, body)| body.as_str())
            .ok_or_else(|| parse_error(0, format!("missing [{name}] section")))
    };
    let params = load_params(section("params")?)?;
    let team = team_from_text(section("team")?)?;
    let payoffs = payoffs_from_csv(section("payoffs")?)?;
    Ok(RunCheckpoint {
        step,
        params,
        team,
        payoffs,
    })
}

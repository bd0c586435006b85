//! Team evaluation: oracle-backed puzzles, sub-additive player selection,
//! match play from fixed openings, and behavioral occupancy reports.
//!
//! Everything here runs against frozen parameters. A team answers a puzzle
//! in two steps: every player searches the position independently, then one
//! player is chosen from the pooled root statistics by a sub-additive rule
//! (visit counts, values, lower confidence bounds, or the gap rule) and its
//! answer is scored. The max-over-latents aggregate — best score any player
//! achieved — upper-bounds every such rule and is reported alongside it.
//!
//! Puzzles are generated, not curated: the exact solver enumerates reachable
//! positions and keeps the ones with a unique optimal line (multi-step),
//! with a graded move-choice table, or with a deceptive draw (the board
//! looks lopsided but the value is 0). The same solver re-verifies every
//! emitted solution with a fresh memo.

mod matches;
mod occupancy;
mod puzzles;
#[cfg(test)]
mod test_support;

pub use matches::{
    leave_one_out_selection, matches_to_csv, play_match, LooChoice, LooReport, LookupRule,
    MatchConfig, MatchRecord, MatchSet, MATCHES_HEADER,
};
pub use occupancy::{
    occupancy_centered_csv, occupancy_mean_csv, occupancy_report, occupancy_std_csv,
    OccupancyConfig, OccupancyReport, OCCUPANCY_PLAYER_HEADER, OCCUPANCY_STD_HEADER,
};
pub use puzzles::{
    evaluate_team_on_puzzle, generate_puzzles, parse_puzzles, puzzles_to_text, score_puzzle,
    solve_puzzle, verify_unique_solution, Puzzle, PuzzleCriteria, PuzzleKind, PuzzleResponse,
    SolutionNode, TeamPuzzleResult,
};

use thiserror::Error;

use crate::diversity::DiversityError;
use crate::evaluator::EvalError;
use crate::game::{GameError, MoveId};
use crate::search::{RootMoveStats, SearchError};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("team statistics are empty")]
    EmptyTeam,
    #[error("player {player} has no root move statistics")]
    EmptyMoveStats { player: usize },
    #[error("puzzle file line {line}: {message}")]
    PuzzleParse { line: usize, message: String },
    #[error("response kind does not match puzzle kind {expected}")]
    KindMismatch { expected: &'static str },
    #[error("invalid criteria: {message}")]
    InvalidCriteria { message: String },
    #[error("leave-one-out selection needs at least 2 seeds, got {got}")]
    NotEnoughSeeds { got: usize },
    #[error("win rate {winrate} outside (0, 1) has no finite rating equivalent")]
    WinrateOutOfRange { winrate: f64 },
    #[error("opening {index} is terminal")]
    TerminalOpening { index: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
}

/// Root search statistics for every player on one position: the raw
/// material of sub-additive selection. Row `j` holds player `j`'s per-move
/// root entries from its own search; all rows must come from the same
/// position and simulation budget.
#[derive(Clone, Debug)]
pub struct PlayerSearchStats {
    pub players: Vec<Vec<RootMoveStats>>,
}

impl PlayerSearchStats {
    fn check(&self) -> Result<(), EvaluationError> {
        if self.players.is_empty() {
            return Err(EvaluationError::EmptyTeam);
        }
        for (player, row) in self.players.iter().enumerate() {
            if row.is_empty() {
                return Err(EvaluationError::EmptyMoveStats { player });
            }
        }
        Ok(())
    }
}

/// How a player is picked from pooled root statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    /// Highest per-player maximum visit count.
    Visit,
    /// Highest per-player value `V^j = max_a Q^j(s, a)`.
    Value,
    /// Highest per-player `max_a (Q^j(s, a) − U^j(s, a))`.
    Lcb,
    /// Lowest value among players within `max_{a,j} U^j(s, a)` of the best
    /// value (an over-estimation guard: prefer the most pessimistic player
    /// that is still plausibly optimal).
    Gap,
}

impl SelectionRule {
    pub const ALL: [SelectionRule; 4] = [
        SelectionRule::Visit,
        SelectionRule::Value,
        SelectionRule::Lcb,
        SelectionRule::Gap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::Visit => "visit",
            SelectionRule::Value => "value",
            SelectionRule::Lcb => "lcb",
            SelectionRule::Gap => "gap",
        }
    }

    pub fn parse(name: &str) -> Option<SelectionRule> {
        match name {
            "visit" => Some(SelectionRule::Visit),
            "value" => Some(SelectionRule::Value),
            "lcb" => Some(SelectionRule::Lcb),
            "gap" => Some(SelectionRule::Gap),
            _ => None,
        }
    }
}

fn player_value(row: &[RootMoveStats]) -> f64 {
    row.iter().map(|s| s.q).fold(f64::NEG_INFINITY, f64::max)
}

/// The row's most-visited move, ties toward the smaller move id.
fn argmax_visits(row: &[RootMoveStats]) -> MoveId {
    let mut best = &row[0];
    for s in &row[1..] {
        if s.n > best.n || (s.n == best.n && s.mv.0 < best.mv.0) {
            best = s;
        }
    }
    best.mv
}

/// Index of the strictly largest score, first index on exact ties.
fn argmax_player(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = j;
        }
    }
    best
}

/// Pick one player from pooled per-player root statistics and return its
/// index together with that player's own most-visited move. All ties
/// resolve toward the smaller player index (and smaller move id).
pub fn subadditive_select(
    stats: &PlayerSearchStats,
    rule: SelectionRule,
) -> Result<(usize, MoveId), EvaluationError> {
    stats.check()?;
    let rows = &stats.players;
    let chosen = match rule {
        SelectionRule::Visit => {
            let scores: Vec<f64> = rows
                .iter()
                .map(|row| row.iter().map(|s| s.n).max().unwrap_or(0) as f64)
                .collect();
            argmax_player(&scores)
        }
        SelectionRule::Value => {
            let scores: Vec<f64> = rows.iter().map(|row| player_value(row)).collect();
            argmax_player(&scores)
        }
        SelectionRule::Lcb => {
            let scores: Vec<f64> = rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|s| s.q - s.u)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            argmax_player(&scores)
        }
        SelectionRule::Gap => {
            let values: Vec<f64> = rows.iter().map(|row| player_value(row)).collect();
            let gap = rows
                .iter()
                .flat_map(|row| row.iter().map(|s| s.u))
                .fold(f64::NEG_INFINITY, f64::max);
            let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            // Lowest value among the players still within `gap` of the best;
            // at least the best player itself always qualifies.
            let mut pick: Option<usize> = None;
            for (j, &v) in values.iter().enumerate() {
                if v >= best - gap && pick.is_none_or(|p| v < values[p]) {
                    pick = Some(j);
                }
            }
            pick.expect("candidate set contains the argmax")
        }
    };
    Ok((chosen, argmax_visits(&rows[chosen])))
}

/// Best per-player score: the oracle aggregate that upper-bounds every
/// sub-additive rule on the same puzzle.
pub fn max_over_latents(scores: &[f64]) -> Result<f64, EvaluationError> {
    if scores.is_empty() {
        return Err(EvaluationError::EmptyTeam);
    }
    Ok(scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Convert a win rate in (0, 1) to a rating difference:
/// `400·log10(w/(1−w))`. Draws count as half a win when the rate is built
/// from match scores.
pub fn winrate_to_elo(winrate: f64) -> Result<f64, EvaluationError> {
    if !(winrate > 0.0 && winrate < 1.0) {
        return Err(EvaluationError::WinrateOutOfRange { winrate });
    }
    Ok(400.0 * (winrate / (1.0 - winrate)).log10())
}

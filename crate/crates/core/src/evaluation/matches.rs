//! Match play from fixed openings and opening-specialist selection.
//!
//! Every player of the team meets the opponent from every opening, once on
//! each color, across a row of seeds: the full grid is the raw material
//! for rating differences and for leave-one-out specialist lookups. Play
//! is greedy throughout — the final-evaluation rule — and scores are kept
//! from the team's perspective (+1 win, 0 draw, −1 loss).
//!
//! Leave-one-out selection builds, per opening and color, a lookup from
//! the *other* seeds' mean scores to a player, then credits that player's
//! held-out score; averaged over folds this is how much of the specialist
//! signal generalizes instead of being re-read from the answer sheet.

use rayon::prelude::*;

use super::EvaluationError;
use crate::evaluator::Evaluate;
use crate::game::GameState;
use crate::rng::{rng_for, Stream};
use crate::search::{greedy_action, run_search, SearchConfig};

/// One game's worth of bookkeeping: which opening, which color the team
/// held, which seed, which player, and the score from the team's side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatchRecord {
    pub opening: usize,
    pub team_first: bool,
    pub seed: usize,
    pub player: usize,
    pub score: i8,
}

/// Complete grid of match results:
/// `n_openings × 2 colors × n_seeds × n_players` records.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchSet {
    pub records: Vec<MatchRecord>,
    pub n_openings: usize,
    pub n_seeds: usize,
    pub n_players: usize,
}

impl MatchSet {
    pub fn mean_score_for_player(&self, player: usize) -> f64 {
        let scores: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.player == player)
            .map(|r| f64::from(r.score))
            .collect();
        if scores.is_empty() {
            return 0.0;
        }
        scores.iter().sum::<f64>() / scores.len() as f64
    }

    /// Mean score when an oracle picks the best player per (opening,
    /// color, seed) cell after seeing the outcomes.
    pub fn max_over_latents_mean(&self) -> f64 {
        let mut total = 0.0;
        let mut cells = 0usize;
        for opening in 0..self.n_openings {
            for &team_first in &[true, false] {
                for seed in 0..self.n_seeds {
                    let best = self
                        .records
                        .iter()
                        .filter(|r| {
                            r.opening == opening && r.team_first == team_first && r.seed == seed
                        })
                        .map(|r| f64::from(r.score))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if best.is_finite() {
                        total += best;
                        cells += 1;
                    }
                }
            }
        }
        if cells == 0 {
            0.0
        } else {
            total / cells as f64
        }
    }

    /// Map a mean score in [−1, 1] to a win rate in [0, 1].
    pub fn score_to_winrate(mean_score: f64) -> f64 {
        (mean_score + 1.0) / 2.0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MatchConfig {
    pub n_simulations: usize,
    pub n_seeds: usize,
    pub seed: u64,
}

impl Default for MatchConfig {
    fn default() -> MatchConfig {
        MatchConfig {
            n_simulations: 100,
            n_seeds: 2,
            seed: 0,
        }
    }
}

fn play_single(
    team: &dyn Evaluate,
    latent: usize,
    opponent: &dyn Evaluate,
    opening: &GameState,
    team_first: bool,
    search: &SearchConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<i8, EvaluationError> {
    let team_seat = if team_first {
        opening.to_move()
    } else {
        opening.to_move().other()
    };
    let mut state = opening.clone();
    let outcome = loop {
        if let Some(outcome) = state.outcome() {
            break outcome;
        }
        let team_moves = state.to_move() == team_seat;
        let (eval, lat) = if team_moves {
            (team, latent)
        } else {
            (opponent, 0)
        };
        let result = run_search(&state, lat, eval, None, search, rng)?;
        let mv = greedy_action(&result, rng);
        state = state.apply_move(mv)?;
    };
    Ok(outcome.signed_for(team_seat))
}

/// Play the full grid: every (opening, color, seed, player) cell exactly
/// once, greedy selection throughout, opponent always conditioned on
/// latent 0. Games are independent and run concurrently; each draws from
/// its own seed stream, so the set is a pure function of the inputs.
pub fn play_match(
    team: &(dyn Evaluate + Sync),
    n_players: usize,
    opponent: &(dyn Evaluate + Sync),
    openings: &[GameState],
    config: &MatchConfig,
) -> Result<MatchSet, EvaluationError> {
    if n_players == 0 {
        return Err(EvaluationError::EmptyTeam);
    }
    for (index, opening) in openings.iter().enumerate() {
        if opening.is_terminal() {
            return Err(EvaluationError::TerminalOpening { index });
        }
    }
    let search = SearchConfig {
        n_simulations: config.n_simulations,
        ..SearchConfig::default()
    };
    let mut jobs: Vec<MatchRecord> = Vec::new();
    for opening in 0..openings.len() {
        for &team_first in &[true, false] {
            for seed in 0..config.n_seeds {
                for player in 0..n_players {
                    jobs.push(MatchRecord {
                        opening,
                        team_first,
                        seed,
                        player,
                        score: 0,
                    });
                }
            }
        }
    }
    let records: Vec<Result<MatchRecord, EvaluationError>> = jobs
        .par_iter()
        .enumerate()
        .map(|(game_idx, job)| {
            let mut rng = rng_for(config.seed, Stream::Evaluation, game_idx as u64);
            let score = play_single(
                team,
                job.player,
                opponent,
                &openings[job.opening],
                job.team_first,
                &search,
                &mut rng,
            )?;
            Ok(MatchRecord { score, ..*job })
        })
        .collect();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        out.push(r?);
    }
    Ok(MatchSet {
        records: out,
        n_openings: openings.len(),
        n_seeds: config.n_seeds,
        n_players,
    })
}

pub const MATCHES_HEADER: &str = "opening,color,seed,player,score";

/// One CSV row per record, colors written as first/second.
pub fn matches_to_csv(set: &MatchSet) -> String {
    let mut out = String::from(MATCHES_HEADER);
    out.push('\n');
    for r in &set.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.opening,
            if r.team_first { "first" } else { "second" },
            r.seed,
            r.player,
            r.score
        ));
    }
    out
}

/// How the specialist lookup picks a player from the other seeds' means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LookupRule {
    /// Highest mean score, smaller index on ties.
    Best,
    /// Lowest mean among players within `width` of the best mean — the
    /// pessimist that one more game could still crown.
    Gap { width: f64 },
}

impl LookupRule {
    /// The published gap: one win-and-loss swap across 500 games.
    pub const PAPER_GAP: LookupRule = LookupRule::Gap { width: 2.0 / 500.0 };
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LooChoice {
    pub opening: usize,
    pub team_first: bool,
    pub heldout_seed: usize,
    pub player: usize,
    pub heldout_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LooReport {
    pub choices: Vec<LooChoice>,
    /// Mean held-out score across every (opening, color, fold).
    pub mean_heldout_score: f64,
}

fn pick(means: &[f64], rule: LookupRule) -> usize {
    match rule {
        LookupRule::Best => {
            let mut best = 0;
            for (j, &v) in means.iter().enumerate().skip(1) {
                if v > means[best] {
                    best = j;
                }
            }
            best
        }
        LookupRule::Gap { width } => {
            let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut pick: Option<usize> = None;
            for (j, &v) in means.iter().enumerate() {
                if v >= top - width && pick.is_none_or(|p| v < means[p]) {
                    pick = Some(j);
                }
            }
            pick.expect("the best mean is always a candidate")
        }
    }
}

/// For every (opening, color) and every held-out seed, select the player
/// with the best mean score over the *other* seeds and credit the held-out
/// score of that player. Needs at least two seeds and a complete grid.
pub fn leave_one_out_selection(
    set: &MatchSet,
    rule: LookupRule,
) -> Result<LooReport, EvaluationError> {
    if set.n_seeds < 2 {
        return Err(EvaluationError::NotEnoughSeeds { got: set.n_seeds });
    }
    if set.n_players == 0 || set.n_openings == 0 {
        return Err(EvaluationError::EmptyTeam);
    }
    // table[opening][color][seed][player]
    let mut table =
        vec![vec![vec![vec![None; set.n_players]; set.n_seeds]; 2]; set.n_openings];
    for r in &set.records {
        let color = usize::from(!r.team_first);
        let cell = table
            .get_mut(r.opening)
            .and_then(|o| o[color].get_mut(r.seed))
            .and_then(|s| s.get_mut(r.player))
            .ok_or(EvaluationError::InvalidCriteria {
                message: format!(
                    "match record ({}, {}, {}) is outside the declared grid",
                    r.opening, r.seed, r.player
                ),
            })?;
        if cell.replace(f64::from(r.score)).is_some() {
            return Err(EvaluationError::InvalidCriteria {
                message: format!(
                    "duplicate match record for opening {} seed {} player {}",
                    r.opening, r.seed, r.player
                ),
            });
        }
    }
    let mut choices = Vec::new();
    let mut total = 0.0;
    for opening in 0..set.n_openings {
        for color in 0..2 {
            for heldout in 0..set.n_seeds {
                let mut means = vec![0.0; set.n_players];
                for (player, mean) in means.iter_mut().enumerate() {
                    let mut sum = 0.0;
                    for seed in (0..set.n_seeds).filter(|&s| s != heldout) {
                        sum += table[opening][color][seed][player].ok_or(
                            EvaluationError::InvalidCriteria {
                                message: format!(
                                    "missing record: opening {opening} seed {seed} player {player}"
                                ),
                            },
                        )?;
                    }
                    *mean = sum / (set.n_seeds - 1) as f64;
                }
                let player = pick(&means, rule);
                let heldout_score = table[opening][color][heldout][player].ok_or(
                    EvaluationError::InvalidCriteria {
                        message: format!(
                            "missing record: opening {opening} seed {heldout} player {player}"
                        ),
                    },
                )?;
                total += heldout_score;
                choices.push(LooChoice {
                    opening,
                    team_first: color == 0,
                    heldout_seed: heldout,
                    player,
                    heldout_score,
                });
            }
        }
    }
    let mean_heldout_score = total / choices.len() as f64;
    Ok(LooReport {
        choices,
        mean_heldout_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::test_support::OracleEval;
    use crate::evaluator::TabularParams;
    use crate::game::{GameSpec, MoveId};

    fn openings_after(move_lists: &[&[usize]]) -> Vec<GameState> {
        move_lists
            .iter()
            .map(|moves| {
                let mut s = GameState::initial(GameSpec::tictactoe());
                for &m in *moves {
                    s = s.apply_move(MoveId(m)).unwrap();
                }
                s
            })
            .collect()
    }

    #[test]
    fn the_grid_has_exactly_one_record_per_cell() {
        let params = TabularParams::new(GameSpec::tictactoe(), 2);
        let openings = openings_after(&[&[], &[4], &[0, 4]]);
        let set = play_match(
            &params,
            2,
            &params,
            &openings,
            &MatchConfig {
                n_simulations: 4,
                n_seeds: 5,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(set.records.len(), 3 * 2 * 5 * 2);
        let mut keys: Vec<(usize, bool, usize, usize)> = set
            .records
            .iter()
            .map(|r| (r.opening, r.team_first, r.seed, r.player))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), set.records.len());
        assert!(set.records.iter().all(|r| (-1..=1).contains(&r.score)));
    }

    #[test]
    fn mirror_matches_average_to_zero() {
        // Identical parameters on both sides of a symmetric opening: the
        // color-pooled mean is zero up to sampling noise (3σ with 80
        // games of score variance ≤ 1).
        let params = TabularParams::new(GameSpec::tictactoe(), 1);
        let openings = openings_after(&[&[]]);
        let set = play_match(
            &params,
            1,
            &params,
            &openings,
            &MatchConfig {
                n_simulations: 8,
                n_seeds: 40,
                seed: 11,
            },
        )
        .unwrap();
        assert_eq!(set.records.len(), 80);
        let mean = set.mean_score_for_player(0);
        assert!(mean.abs() <= 3.0 / (80.0_f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn match_play_is_deterministic_for_a_seed() {
        let params = TabularParams::new(GameSpec::tictactoe(), 2);
        let openings = openings_after(&[&[4], &[0]]);
        let config = MatchConfig {
            n_simulations: 6,
            n_seeds: 3,
            seed: 21,
        };
        let a = play_match(&params, 2, &params, &openings, &config).unwrap();
        let b = play_match(&params, 2, &params, &openings, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(matches_to_csv(&a), matches_to_csv(&b));
    }

    #[test]
    fn a_perfect_team_never_loses_tic_tac_toe() {
        // The oracle player cannot lose a game that starts from a drawn
        // (or winnable) position, whichever color it takes.
        let oracle = OracleEval::new();
        let random = TabularParams::new(GameSpec::tictactoe(), 1);
        let openings = openings_after(&[&[], &[4], &[0]]);
        let set = play_match(
            &oracle,
            1,
            &random,
            &openings,
            &MatchConfig {
                n_simulations: 120,
                n_seeds: 4,
                seed: 2,
            },
        )
        .unwrap();
        assert!(set.records.iter().all(|r| r.score >= 0), "{:?}", set.records);
        // And it wins at least sometimes against uniform priors.
        assert!(set.records.iter().any(|r| r.score == 1));
    }

    #[test]
    fn terminal_openings_are_rejected() {
        let params = TabularParams::new(GameSpec::tictactoe(), 1);
        // X takes the top row.
        let terminal = openings_after(&[&[0, 3, 1, 4, 2]]);
        assert!(matches!(
            play_match(&params, 1, &params, &terminal, &MatchConfig::default()),
            Err(EvaluationError::TerminalOpening { index: 0 })
        ));
    }

    #[test]
    fn matches_csv_has_the_documented_schema() {
        let set = MatchSet {
            records: vec![
                MatchRecord {
                    opening: 0,
                    team_first: true,
                    seed: 1,
                    player: 2,
                    score: -1,
                },
                MatchRecord {
                    opening: 3,
                    team_first: false,
                    seed: 0,
                    player: 0,
                    score: 1,
                },
            ],
            n_openings: 4,
            n_seeds: 2,
            n_players: 3,
        };
        let csv = matches_to_csv(&set);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "opening,color,seed,player,score");
        assert_eq!(lines[1], "0,first,1,2,-1");
        assert_eq!(lines[2], "3,second,0,0,1");
        assert_eq!(lines.len(), 3);
    }

    /// Build a complete grid from a score function.
    fn grid(
        n_openings: usize,
        n_seeds: usize,
        n_players: usize,
        score: impl Fn(usize, bool, usize, usize) -> i8,
    ) -> MatchSet {
        let mut records = Vec::new();
        for opening in 0..n_openings {
            for &team_first in &[true, false] {
                for seed in 0..n_seeds {
                    for player in 0..n_players {
                        records.push(MatchRecord {
                            opening,
                            team_first,
                            seed,
                            player,
                            score: score(opening, team_first, seed, player),
                        });
                    }
                }
            }
        }
        MatchSet {
            records,
            n_openings,
            n_seeds,
            n_players,
        }
    }

    #[test]
    fn a_dominant_player_is_always_chosen() {
        let set = grid(2, 3, 2, |_, _, _, p| if p == 1 { 1 } else { -1 });
        let report = leave_one_out_selection(&set, LookupRule::Best).unwrap();
        assert!(report.choices.iter().all(|c| c.player == 1));
        assert_eq!(report.mean_heldout_score, 1.0);
        assert_eq!(report.choices.len(), 2 * 2 * 3);
    }

    #[test]
    fn identical_seed_tables_close_the_generalization_gap() {
        // Scores depend only on (opening, player): the held-out seed reads
        // the same table the lookup was built from.
        let set = grid(3, 2, 3, |o, _, _, p| if p == o { 1 } else { 0 });
        let report = leave_one_out_selection(&set, LookupRule::Best).unwrap();
        // Chosen player is the opening's specialist; held-out score equals
        // the in-sample mean, 1.
        assert!(report.choices.iter().all(|c| c.player == c.opening));
        assert_eq!(report.mean_heldout_score, 1.0);
    }

    #[test]
    fn specialist_maps_are_recovered_exactly() {
        // Player 0 wins opening 0 and loses opening 1; player 1 mirrored.
        let set = grid(2, 3, 2, |o, _, _, p| if p == o { 1 } else { -1 });
        let report = leave_one_out_selection(&set, LookupRule::Best).unwrap();
        for c in &report.choices {
            assert_eq!(c.player, c.opening);
            assert_eq!(c.heldout_score, 1.0);
        }
        // An oracle over the same set does no better: the specialists are
        // genuine.
        assert_eq!(report.mean_heldout_score, set.max_over_latents_mean());
    }

    #[test]
    fn the_gap_lookup_prefers_the_pessimist_in_the_band() {
        // Player 0 scores 1 everywhere. Player 1 scores 1 except a single
        // 0 at seed 4: its leave-out means are 1 − 1/4 inside folds 0..3
        // (outside the 2/500 band, so the leader is kept) and exactly 1 in
        // fold 4 (tied, so the smaller index is kept). The pessimist only
        // ever diverges from Best when the means differ but stay within
        // the band — which integral scores cannot produce at this scale,
        // so that case is covered by the direct picker test below.
        let set = grid(1, 5, 2, |_, _, s, p| i8::from(p == 0 || s != 4));
        let best = leave_one_out_selection(&set, LookupRule::Best).unwrap();
        assert!(best.choices.iter().all(|c| c.player == 0));
        let gap = leave_one_out_selection(&set, LookupRule::PAPER_GAP).unwrap();
        assert!(gap.choices.iter().all(|c| c.player == 0));
        // A full tie also falls toward player 0 everywhere.
        let tied = grid(1, 4, 2, |_, _, _, _| 0);
        let report = leave_one_out_selection(&tied, LookupRule::PAPER_GAP).unwrap();
        assert!(report.choices.iter().all(|c| c.player == 0));
    }

    #[test]
    fn gap_width_separates_the_rules_on_fractional_tables() {
        // Integral scores move leave-out means in steps of at least
        // 1/(n_seeds−1), so widths as small as 2/500 need a direct unit
        // test of the picker instead.
        assert_eq!(pick(&[0.9, 0.8996], LookupRule::Best), 0);
        assert_eq!(
            pick(&[0.9, 0.8996], LookupRule::Gap { width: 2.0 / 500.0 }),
            1
        );
        assert_eq!(
            pick(&[0.9, 0.88], LookupRule::Gap { width: 2.0 / 500.0 }),
            0
        );
        // Ties toward the smaller index in both rules.
        assert_eq!(pick(&[0.5, 0.5], LookupRule::Best), 0);
        assert_eq!(pick(&[0.5, 0.5], LookupRule::Gap { width: 0.1 }), 0);
    }

    #[test]
    fn leave_one_out_needs_two_seeds_and_a_complete_grid() {
        let one_seed = grid(1, 1, 2, |_, _, _, _| 0);
        assert!(matches!(
            leave_one_out_selection(&one_seed, LookupRule::Best),
            Err(EvaluationError::NotEnoughSeeds { got: 1 })
        ));
        let mut holed = grid(1, 2, 2, |_, _, _, _| 0);
        holed.records.pop();
        assert!(leave_one_out_selection(&holed, LookupRule::Best).is_err());
        let mut doubled = grid(1, 2, 2, |_, _, _, _| 0);
        doubled.records.push(doubled.records[0]);
        assert!(leave_one_out_selection(&doubled, LookupRule::Best).is_err());
    }
}

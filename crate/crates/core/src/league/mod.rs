//! Population play: who trains against whom, and what the results imply.
//!
//! A team member ("exploiter") is repeatedly matched against a possibly
//! different team member ("exploitee"); the exploiter's seat in the game is
//! part of the matchup. Results accumulate in a [`PayoffTable`] keyed by
//! seat, and a matchmaking rule periodically converts that table into one
//! [`InteractionGraph`] per seat: row `i` is the distribution over opponents
//! for exploiter `i`. The graphs factorize matchup sampling as
//! `P(i, j, seat) = P(j | i, seat) · P_unif(i) · P_unif(seat)`.
//!
//! Empirical payoffs are always expressed from the first mover's
//! perspective, and both seatings of a pair pool into one estimate, so the
//! Nash computations see a single zero-sum matrix per sub-population.
//!
//! Player 0 is never treated as a frozen opponent: under every rule its own
//! row is (or includes) itself, so it degenerates to ordinary self-play.

pub mod nash;

pub use nash::{nash_gap, solve_nash, NashError, NashSolution};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diversity::Trajectory;
use crate::game::{Outcome, Player};

#[derive(Debug, Error)]
pub enum LeagueError {
    #[error("league has no players")]
    EmptyPopulation,
    #[error("player {player} out of range for a league of {n_players}")]
    PlayerOutOfRange { player: usize, n_players: usize },
    #[error("interaction graph row {row} sums to {sum}, expected 1")]
    MalformedRow { row: usize, sum: f64 },
    #[error("graph size {graph} does not match league size {league}")]
    SizeMismatch { graph: usize, league: usize },
    #[error(transparent)]
    Nash(#[from] NashError),
}

/// One sampled pairing: exploiter `i` faces exploitee `j`, with `i` either
/// moving first or second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Matchup {
    pub exploiter: usize,
    pub exploitee: usize,
    pub exploiter_first: bool,
}

/// Cumulative results of one ordered pairing, counted from the first
/// mover's perspective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PayoffCell {
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
}

impl PayoffCell {
    pub fn games(&self) -> u64 {
        self.wins + self.draws + self.losses
    }

    /// Empirical win rate with draws worth half a point; 0.5 when empty.
    pub fn winrate(&self) -> f64 {
        let g = self.games();
        if g == 0 {
            0.5
        } else {
            (self.wins as f64 + 0.5 * self.draws as f64) / g as f64
        }
    }

    /// Mean signed score in [-1, 1]; 0 when no games were played.
    pub fn signed_mean(&self) -> f64 {
        let g = self.games();
        if g == 0 {
            0.0
        } else {
            (self.wins as f64 - self.losses as f64) / g as f64
        }
    }

    fn record(&mut self, outcome: Outcome) {
        match outcome.signed_for(Player::One) {
            1 => self.wins += 1,
            0 => self.draws += 1,
            _ => self.losses += 1,
        }
    }
}

/// Match results split by the exploiter's seat.
///
/// Two matrices, one per seat: `exploiter_first[(i, j)]` counts games where
/// exploiter `i` moved first against `j`, `exploiter_second[(i, j)]` counts
/// games where `i` moved second (so `j` moved first). Every cell stores
/// outcomes from the first mover's perspective regardless of which matrix
/// it sits in, which lets both seatings of a pair pool into one estimate.
///
/// Writers are expected to be serialized (one learner thread records all
/// results in this implementation), so plain integer cells suffice.
#[derive(Clone, Debug)]
pub struct PayoffTable {
    n_players: usize,
    exploiter_first: Vec<PayoffCell>,
    exploiter_second: Vec<PayoffCell>,
}

impl PayoffTable {
    pub fn new(n_players: usize) -> Self {
        Self {
            n_players,
            exploiter_first: vec![PayoffCell::default(); n_players * n_players],
            exploiter_second: vec![PayoffCell::default(); n_players * n_players],
        }
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    fn check_player(&self, player: usize) -> Result<(), LeagueError> {
        if player >= self.n_players {
            return Err(LeagueError::PlayerOutOfRange {
                player,
                n_players: self.n_players,
            });
        }
        Ok(())
    }

    /// Record one finished game. The outcome is interpreted from the first
    /// mover's perspective; exactly one cell of one matrix is updated.
    pub fn record(&mut self, matchup: &Matchup, outcome: Outcome) -> Result<(), LeagueError> {
        self.check_player(matchup.exploiter)?;
        self.check_player(matchup.exploitee)?;
        let idx = matchup.exploiter * self.n_players + matchup.exploitee;
        let cell = if matchup.exploiter_first {
            &mut self.exploiter_first[idx]
        } else {
            &mut self.exploiter_second[idx]
        };
        cell.record(outcome);
        Ok(())
    }

    /// Overwrite one cell (checkpoint loading).
    pub fn set_cell(
        &mut self,
        exploiter: usize,
        exploitee: usize,
        exploiter_first: bool,
        cell: PayoffCell,
    ) -> Result<(), LeagueError> {
        self.check_player(exploiter)?;
        self.check_player(exploitee)?;
        let idx = exploiter * self.n_players + exploitee;
        if exploiter_first {
            self.exploiter_first[idx] = cell;
        } else {
            self.exploiter_second[idx] = cell;
        }
        Ok(())
    }

    /// The cell for `(exploiter, exploitee)` in the matrix for the given
    /// seat.
    pub fn cell(&self, exploiter: usize, exploitee: usize, exploiter_first: bool) -> &PayoffCell {
        let idx = exploiter * self.n_players + exploitee;
        if exploiter_first {
            &self.exploiter_first[idx]
        } else {
            &self.exploiter_second[idx]
        }
    }

    /// All games where `first` moved first against `second`, pooled across
    /// whichever of the two was the exploiter at the time.
    pub fn pooled_first_mover(&self, first: usize, second: usize) -> PayoffCell {
        let a = self.cell(first, second, true);
        let b = self.cell(second, first, false);
        PayoffCell {
            wins: a.wins + b.wins,
            draws: a.draws + b.draws,
            losses: a.losses + b.losses,
        }
    }

    /// Mean signed payoff of `first` moving first against `second`; 0 when
    /// that pairing has no recorded games.
    pub fn first_mover_payoff(&self, first: usize, second: usize) -> f64 {
        self.pooled_first_mover(first, second).signed_mean()
    }

    /// Zero-sum payoff matrix over players `0..=limit`, first mover as the
    /// row player.
    fn payoff_matrix(&self, limit: usize) -> Vec<Vec<f64>> {
        (0..=limit)
            .map(|r| (0..=limit).map(|c| self.first_mover_payoff(r, c)).collect())
            .collect()
    }

    pub fn total_games(&self) -> u64 {
        self.exploiter_first
            .iter()
            .chain(&self.exploiter_second)
            .map(PayoffCell::games)
            .sum()
    }
}

/// Row-stochastic opponent distributions: row `i` is the distribution over
/// exploitees when `i` is the exploiter.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionGraph {
    pub rows: Vec<Vec<f64>>,
}

impl InteractionGraph {
    pub fn n_players(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Every row must be non-negative, finite, and sum to 1 within 1e-9.
    pub fn validate(&self) -> Result<(), LeagueError> {
        for (i, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let well_formed =
                row.iter().all(|&p| p.is_finite() && p >= 0.0) && (sum - 1.0).abs() <= 1e-9;
            if !well_formed {
                return Err(LeagueError::MalformedRow { row: i, sum });
            }
        }
        Ok(())
    }
}

/// The pair of graphs a matchmaking rule produces, one per exploiter seat.
#[derive(Clone, Debug, PartialEq)]
pub struct LeagueGraphs {
    pub exploiter_first: InteractionGraph,
    pub exploiter_second: InteractionGraph,
}

impl LeagueGraphs {
    pub fn n_players(&self) -> usize {
        self.exploiter_first.n_players()
    }

    fn for_seat(&self, exploiter_first: bool) -> &InteractionGraph {
        if exploiter_first {
            &self.exploiter_first
        } else {
            &self.exploiter_second
        }
    }
}

/// How opponent rows are derived from the payoff table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchmakerKind {
    /// Everyone plays themselves: the identity graph.
    Selfplay,
    /// Every opponent equally likely.
    Uniform,
    /// Opponents drawn from the Nash mixture over players `0..=i`.
    #[default]
    PsroNash,
    /// Nash mixture with mass removed from opponents that beat `i`.
    PsroRectified,
    /// Uniform over players `0..=i`.
    FictitiousPlay,
    /// A fixed cycle among the first `n-1` players; the last player plays
    /// the Nash mixture over everyone.
    PsroCycle,
}

impl MatchmakerKind {
    pub const ALL: [MatchmakerKind; 6] = [
        MatchmakerKind::Selfplay,
        MatchmakerKind::Uniform,
        MatchmakerKind::PsroNash,
        MatchmakerKind::PsroRectified,
        MatchmakerKind::FictitiousPlay,
        MatchmakerKind::PsroCycle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MatchmakerKind::Selfplay => "selfplay",
            MatchmakerKind::Uniform => "uniform",
            MatchmakerKind::PsroNash => "psro-nash",
            MatchmakerKind::PsroRectified => "psro-rectified",
            MatchmakerKind::FictitiousPlay => "fictitious-play",
            MatchmakerKind::PsroCycle => "psro-cycle",
        }
    }

    pub fn parse(s: &str) -> Option<MatchmakerKind> {
        MatchmakerKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// The two opponent mixtures of the zero-sum sub-game over players
/// `0..=i`: what a first-moving exploiter faces (the column mixture) and
/// what a second-moving exploiter faces (the row mixture), padded to the
/// full league size.
fn nash_opponent_rows(
    payoffs: &PayoffTable,
    i: usize,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), LeagueError> {
    let sol = solve_nash(&payoffs.payoff_matrix(i))?;
    let pad = |mix: &[f64]| {
        let mut row = vec![0.0; n];
        row[..mix.len()].copy_from_slice(mix);
        row
    };
    Ok((pad(&sol.col), pad(&sol.row)))
}

/// Zero out opponents whose empirical average payoff against `i` (in this
/// seating) is strictly positive, then renormalize. If nothing survives,
/// fall back to pure self-play for this row.
fn rectify(row: &mut [f64], i: usize, beats_i: impl Fn(usize) -> bool) {
    for (j, p) in row.iter_mut().enumerate() {
        if beats_i(j) {
            *p = 0.0;
        }
    }
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        for p in row.iter_mut() {
            *p /= sum;
        }
    } else {
        row.fill(0.0);
        row[i] = 1.0;
    }
}

fn one_hot(n: usize, j: usize) -> Vec<f64> {
    let mut row = vec![0.0; n];
    row[j] = 1.0;
    row
}

/// Build both seat graphs for the given rule from the current payoff
/// table.
pub fn build_graphs(
    kind: MatchmakerKind,
    payoffs: &PayoffTable,
) -> Result<LeagueGraphs, LeagueError> {
    let n = payoffs.n_players();
    if n == 0 {
        return Err(LeagueError::EmptyPopulation);
    }
    let mut first_rows = Vec::with_capacity(n);
    let mut second_rows = Vec::with_capacity(n);
    for i in 0..n {
        let (first, second) = match kind {
            MatchmakerKind::Selfplay => (one_hot(n, i), one_hot(n, i)),
            MatchmakerKind::Uniform => {
                let row = vec![1.0 / n as f64; n];
                (row.clone(), row)
            }
            MatchmakerKind::FictitiousPlay => {
                let mut row = vec![0.0; n];
                row[..=i].fill(1.0 / (i + 1) as f64);
                (row.clone(), row)
            }
            MatchmakerKind::PsroNash => nash_opponent_rows(payoffs, i, n)?,
            MatchmakerKind::PsroRectified => {
                let (mut first, mut second) = nash_opponent_rows(payoffs, i, n)?;
                // Opponent j beats a first-moving i when i's payoff
                // against j is negative; mirrored for the second seat.
                rectify(&mut first, i, |j| payoffs.first_mover_payoff(i, j) < 0.0);
                rectify(&mut second, i, |j| payoffs.first_mover_payoff(j, i) > 0.0);
                (first, second)
            }
            MatchmakerKind::PsroCycle => {
                if n == 1 {
                    (vec![1.0], vec![1.0])
                } else if i + 1 < n {
                    let row = one_hot(n, (i + 1) % (n - 1));
                    (row.clone(), row)
                } else {
                    nash_opponent_rows(payoffs, n - 1, n)?
                }
            }
        };
        first_rows.push(first);
        second_rows.push(second);
    }
    let graphs = LeagueGraphs {
        exploiter_first: InteractionGraph { rows: first_rows },
        exploiter_second: InteractionGraph { rows: second_rows },
    };
    graphs.exploiter_first.validate()?;
    graphs.exploiter_second.validate()?;
    Ok(graphs)
}

/// Draw one matchup: exploiter uniform, seat uniform, exploitee from the
/// exploiter's row of the seat-appropriate graph (in that rng order).
pub fn sample_matchup(
    graphs: &LeagueGraphs,
    rng: &mut ChaCha8Rng,
) -> Result<Matchup, LeagueError> {
    let n = graphs.n_players();
    if n == 0 {
        return Err(LeagueError::EmptyPopulation);
    }
    if graphs.exploiter_second.n_players() != n {
        return Err(LeagueError::SizeMismatch {
            graph: graphs.exploiter_second.n_players(),
            league: n,
        });
    }
    let exploiter = rng.gen_range(0..n);
    let exploiter_first = rng.gen_bool(0.5);
    let row = graphs.for_seat(exploiter_first).row(exploiter);
    let sum: f64 = row.iter().sum();
    if !(row.iter().all(|&p| p.is_finite() && p >= 0.0) && (sum - 1.0).abs() <= 1e-9) {
        return Err(LeagueError::MalformedRow {
            row: exploiter,
            sum,
        });
    }
    let ticket: f64 = rng.gen();
    let mut acc = 0.0;
    let mut exploitee = None;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if ticket < acc {
            exploitee = Some(j);
            break;
        }
    }
    // Floating-point shortfall: fall back to the last reachable opponent.
    let exploitee = exploitee.unwrap_or_else(|| {
        row.iter()
            .rposition(|&p| p > 0.0)
            .expect("row sums to 1, so some entry is positive")
    });
    Ok(Matchup {
        exploiter,
        exploitee,
        exploiter_first,
    })
}

/// Keep only the experience that trains the exploiter: for a cross-player
/// matchup that is the exploiter-owned trajectory alone; for self-play both
/// sides survive.
pub fn filter_experience(matchup: &Matchup, trajectories: Vec<Trajectory>) -> Vec<Trajectory> {
    trajectories
        .into_iter()
        .filter(|t| t.owner == matchup.exploiter)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_for, Stream};

    fn matchup(exploiter: usize, exploitee: usize, exploiter_first: bool) -> Matchup {
        Matchup {
            exploiter,
            exploitee,
            exploiter_first,
        }
    }

    #[test]
    fn recording_touches_exactly_one_cell_of_one_matrix() {
        let mut table = PayoffTable::new(4);
        table
            .record(&matchup(0, 1, true), Outcome::Win(Player::One))
            .unwrap();
        let cell = table.cell(0, 1, true);
        assert_eq!((cell.wins, cell.draws, cell.losses), (1, 0, 0));
        assert_eq!(cell.games(), 1);
        assert_eq!(table.cell(0, 1, false).games(), 0);
        assert_eq!(table.cell(1, 0, true).games(), 0);
        assert_eq!(table.cell(1, 0, false).games(), 0);
        assert_eq!(table.total_games(), 1);
    }

    #[test]
    fn draws_count_half_a_point() {
        let mut table = PayoffTable::new(2);
        for _ in 0..10 {
            table.record(&matchup(1, 0, true), Outcome::Draw).unwrap();
        }
        let cell = table.cell(1, 0, true);
        assert_eq!(cell.draws, 10);
        assert!((cell.winrate() - 0.5).abs() < 1e-15);
        assert_eq!(cell.signed_mean(), 0.0);
    }

    #[test]
    fn cell_counts_always_reconcile() {
        let mut table = PayoffTable::new(3);
        let mut rng = rng_for(11, Stream::Matchup, 0);
        for g in 0..500 {
            let m = matchup(g % 3, (g * 7 + 1) % 3, g % 2 == 0);
            let outcome = match rng.gen_range(0..3) {
                0 => Outcome::Win(Player::One),
                1 => Outcome::Win(Player::Two),
                _ => Outcome::Draw,
            };
            table.record(&m, outcome).unwrap();
        }
        assert_eq!(table.total_games(), 500);
        for i in 0..3 {
            for j in 0..3 {
                for seat in [true, false] {
                    let c = table.cell(i, j, seat);
                    assert_eq!(c.wins + c.draws + c.losses, c.games());
                }
            }
        }
    }

    #[test]
    fn both_seatings_pool_into_one_first_mover_estimate() {
        let mut table = PayoffTable::new(3);
        // Exploiter 2 moves first against 0 and wins.
        table
            .record(&matchup(2, 0, true), Outcome::Win(Player::One))
            .unwrap();
        // Exploiter 0 moves second against 2: player 2 moved first and won.
        table
            .record(&matchup(0, 2, false), Outcome::Win(Player::One))
            .unwrap();
        let pooled = table.pooled_first_mover(2, 0);
        assert_eq!((pooled.wins, pooled.losses, pooled.games()), (2, 0, 2));
        assert!((table.first_mover_payoff(2, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unplayed_pairings_have_zero_payoff() {
        let table = PayoffTable::new(4);
        assert_eq!(table.first_mover_payoff(1, 3), 0.0);
        assert_eq!(table.first_mover_payoff(2, 2), 0.0);
    }

    #[test]
    fn out_of_range_players_are_rejected() {
        let mut table = PayoffTable::new(2);
        let err = table
            .record(&matchup(0, 5, true), Outcome::Draw)
            .unwrap_err();
        assert!(matches!(
            err,
            LeagueError::PlayerOutOfRange {
                player: 5,
                n_players: 2
            }
        ));
    }

    #[test]
    fn selfplay_graph_is_the_identity() {
        let graphs = build_graphs(MatchmakerKind::Selfplay, &PayoffTable::new(4)).unwrap();
        for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
            for i in 0..4 {
                assert_eq!(seat.row(i), one_hot(4, i).as_slice());
            }
        }
    }

    #[test]
    fn uniform_graph_spreads_mass_evenly() {
        let graphs = build_graphs(MatchmakerKind::Uniform, &PayoffTable::new(4)).unwrap();
        for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
            for i in 0..4 {
                assert_eq!(seat.row(i), vec![0.25; 4].as_slice());
            }
        }
    }

    #[test]
    fn fictitious_play_graph_is_uniform_over_predecessors() {
        let graphs = build_graphs(MatchmakerKind::FictitiousPlay, &PayoffTable::new(4)).unwrap();
        let expected = [
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0],
            vec![0.25, 0.25, 0.25, 0.25],
        ];
        for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (seat.row(i)[j] - expected[i][j]).abs() < 1e-12,
                        "row {i}: {:?}",
                        seat.row(i)
                    );
                }
            }
        }
    }

    /// A 3-player league with hand-solvable sub-games: player 1 beats both
    /// others from either seat, player 2 beats player 0.
    fn engineered_table() -> PayoffTable {
        let mut table = PayoffTable::new(3);
        let mut put = |first: usize, second: usize, first_wins: bool| {
            let outcome = if first_wins {
                Outcome::Win(Player::One)
            } else {
                Outcome::Win(Player::Two)
            };
            table.record(&matchup(first, second, true), outcome).unwrap();
        };
        put(0, 1, false); // payoff(0,1) = -1
        put(1, 0, true); // payoff(1,0) = +1
        put(0, 2, false); // payoff(0,2) = -1
        put(2, 0, true); // payoff(2,0) = +1
        put(1, 2, true); // payoff(1,2) = +1
        put(2, 1, false); // payoff(2,1) = -1
        table
    }

    #[test]
    fn nash_graph_concentrates_on_the_strongest_predecessor() {
        let graphs = build_graphs(MatchmakerKind::PsroNash, &engineered_table()).unwrap();
        for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
            // Player 0's sub-game is 1x1: pure self-play.
            assert_eq!(seat.row(0), &[1.0, 0.0, 0.0]);
            // Sub-game over {0,1} is [[0,-1],[1,0]]: both mixtures are
            // pure player 1.
            for j in 0..3 {
                let want = if j == 1 { 1.0 } else { 0.0 };
                assert!((seat.row(1)[j] - want).abs() < 1e-9, "{:?}", seat.row(1));
                assert!((seat.row(2)[j] - want).abs() < 1e-9, "{:?}", seat.row(2));
            }
        }
    }

    #[test]
    fn nash_graph_support_never_exceeds_the_predecessor_set() {
        // Even with no games recorded, row i may only reach players 0..=i.
        for kind in [
            MatchmakerKind::PsroNash,
            MatchmakerKind::PsroRectified,
            MatchmakerKind::FictitiousPlay,
        ] {
            let graphs = build_graphs(kind, &PayoffTable::new(5)).unwrap();
            for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
                seat.validate().unwrap();
                for i in 0..5 {
                    for j in i + 1..5 {
                        assert_eq!(seat.row(i)[j], 0.0, "{kind:?} row {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn rectified_graph_falls_back_to_self_when_everyone_beats_the_player() {
        let graphs = build_graphs(MatchmakerKind::PsroRectified, &engineered_table()).unwrap();
        // Player 2 loses to player 1 (the whole Nash mass) from both
        // seats; removing it leaves nothing, so the row falls back to
        // self-play.
        assert_eq!(graphs.exploiter_first.row(2), &[0.0, 0.0, 1.0]);
        assert_eq!(graphs.exploiter_second.row(2), &[0.0, 0.0, 1.0]);
        // Player 1 beats everyone, so its Nash row survives unchanged.
        for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
            assert!((seat.row(1)[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rectified_graph_renormalizes_surviving_mass() {
        // First-mover-advantage game between two players: the {0,1}
        // sub-game is [[+1,+1],[-1... ] -- construct payoffs so the Nash
        // mixture over {0,1} is split, then one side gets rectified away.
        // payoff matrix [[1,-1],[-1,1]] (matching pennies): mixtures are
        // (1/2, 1/2).
        let mut table = PayoffTable::new(2);
        let mut put = |first: usize, second: usize, first_wins: bool, n: u64| {
            for _ in 0..n {
                let outcome = if first_wins {
                    Outcome::Win(Player::One)
                } else {
                    Outcome::Win(Player::Two)
                };
                table.record(&matchup(first, second, true), outcome).unwrap();
            }
        };
        put(0, 0, true, 2);
        put(1, 1, true, 2);
        put(0, 1, false, 2);
        put(1, 0, false, 2);
        let nash = build_graphs(MatchmakerKind::PsroNash, &table).unwrap();
        assert!((nash.exploiter_first.row(1)[0] - 0.5).abs() < 1e-9);
        assert!((nash.exploiter_first.row(1)[1] - 0.5).abs() < 1e-9);

        let rect = build_graphs(MatchmakerKind::PsroRectified, &table).unwrap();
        // Moving first, player 1 loses to player 0 (payoff(1,0) = -1) and
        // beats itself (payoff(1,1) = +1): mass [0, 0.5] renormalizes to
        // [0, 1].
        assert_eq!(rect.exploiter_first.row(1), &[0.0, 1.0]);
        // Moving second, player 1 beats player 0 (payoff(0,1) = -1) and
        // loses to itself: mass [0.5, 0] renormalizes to [1, 0].
        assert_eq!(rect.exploiter_second.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn cycle_graph_rotates_the_first_players_and_mixes_the_last() {
        let graphs = build_graphs(MatchmakerKind::PsroCycle, &PayoffTable::new(4)).unwrap();
        for seat in [&graphs.exploiter_first, &graphs.exploiter_second] {
            assert_eq!(seat.row(0), &[0.0, 1.0, 0.0, 0.0]);
            assert_eq!(seat.row(1), &[0.0, 0.0, 1.0, 0.0]);
            assert_eq!(seat.row(2), &[1.0, 0.0, 0.0, 0.0]);
            assert!((seat.row(3).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        // Degenerate league sizes.
        let one = build_graphs(MatchmakerKind::PsroCycle, &PayoffTable::new(1)).unwrap();
        assert_eq!(one.exploiter_first.row(0), &[1.0]);
        let two = build_graphs(MatchmakerKind::PsroCycle, &PayoffTable::new(2)).unwrap();
        assert_eq!(two.exploiter_first.row(0), &[1.0, 0.0]);
        assert!((two.exploiter_first.row(1).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn graphs_for_an_empty_league_are_an_error() {
        let err = build_graphs(MatchmakerKind::Uniform, &PayoffTable::new(0)).unwrap_err();
        assert!(matches!(err, LeagueError::EmptyPopulation));
    }

    #[test]
    fn matchmaker_names_round_trip() {
        for kind in MatchmakerKind::ALL {
            assert_eq!(MatchmakerKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(MatchmakerKind::parse("nonsense"), None);
        assert_eq!(MatchmakerKind::default(), MatchmakerKind::PsroNash);
    }

    #[test]
    fn selfplay_sampling_always_pairs_a_player_with_itself() {
        let graphs = build_graphs(MatchmakerKind::Selfplay, &PayoffTable::new(5)).unwrap();
        let mut rng = rng_for(3, Stream::Matchup, 0);
        for _ in 0..200 {
            let m = sample_matchup(&graphs, &mut rng).unwrap();
            assert_eq!(m.exploiter, m.exploitee);
            assert!(m.exploiter < 5);
        }
    }

    #[test]
    fn uniform_sampling_matches_its_marginals() {
        let graphs = build_graphs(MatchmakerKind::Uniform, &PayoffTable::new(4)).unwrap();
        let mut rng = rng_for(7, Stream::Matchup, 1);
        let n_draws = 10_000usize;
        let mut i_counts = [0usize; 4];
        let mut j_counts = [0usize; 4];
        let mut firsts = 0usize;
        for _ in 0..n_draws {
            let m = sample_matchup(&graphs, &mut rng).unwrap();
            i_counts[m.exploiter] += 1;
            j_counts[m.exploitee] += 1;
            firsts += m.exploiter_first as usize;
        }
        // Chi-square with 3 degrees of freedom at p = 0.01: 11.345.
        let expected = n_draws as f64 / 4.0;
        for counts in [&i_counts, &j_counts] {
            let chi2: f64 = counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - expected;
                    d * d / expected
                })
                .sum();
            assert!(chi2 < 11.345, "chi2 = {chi2}, counts {counts:?}");
        }
        // Seat is a fair coin: 3 sigma around n/2.
        let sigma = (n_draws as f64 * 0.25).sqrt();
        assert!((firsts as f64 - n_draws as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn sampling_respects_a_weighted_row() {
        // Exploiter 1's opponents follow [0.3, 0.7, 0, 0].
        let weighted = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.3, 0.7, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        let graph = InteractionGraph { rows: weighted };
        let graphs = LeagueGraphs {
            exploiter_first: graph.clone(),
            exploiter_second: graph,
        };
        let mut rng = rng_for(19, Stream::Matchup, 2);
        let mut hits = 0usize;
        let mut zero = 0usize;
        for _ in 0..10_000 {
            let m = sample_matchup(&graphs, &mut rng).unwrap();
            if m.exploiter == 1 {
                hits += 1;
                assert!(m.exploitee < 2, "mass outside the row's support");
                zero += (m.exploitee == 0) as usize;
            }
        }
        let p_hat = zero as f64 / hits as f64;
        let sigma = (0.3 * 0.7 / hits as f64).sqrt();
        assert!(
            (p_hat - 0.3).abs() < 3.0 * sigma,
            "p_hat = {p_hat} over {hits} draws"
        );
    }

    #[test]
    fn sampling_rejects_rows_that_do_not_sum_to_one() {
        let graph = InteractionGraph {
            rows: vec![vec![0.9]],
        };
        let graphs = LeagueGraphs {
            exploiter_first: graph.clone(),
            exploiter_second: graph,
        };
        let mut rng = rng_for(0, Stream::Matchup, 3);
        let err = sample_matchup(&graphs, &mut rng).unwrap_err();
        assert!(matches!(err, LeagueError::MalformedRow { row: 0, .. }));
    }

    #[test]
    fn sampling_an_empty_league_is_an_error() {
        let graph = InteractionGraph { rows: vec![] };
        let graphs = LeagueGraphs {
            exploiter_first: graph.clone(),
            exploiter_second: graph,
        };
        let mut rng = rng_for(0, Stream::Matchup, 4);
        assert!(matches!(
            sample_matchup(&graphs, &mut rng),
            Err(LeagueError::EmptyPopulation)
        ));
    }

    fn tagged_trajectory(owner: usize, seat: Player) -> Trajectory {
        Trajectory {
            owner,
            owner_seat: seat,
            steps: vec![],
            outcome: Outcome::Draw,
        }
    }

    #[test]
    fn cross_matchups_keep_only_the_exploiters_experience() {
        let pair = vec![
            tagged_trajectory(2, Player::One),
            tagged_trajectory(5, Player::Two),
        ];
        let kept = filter_experience(&matchup(2, 5, true), pair);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].owner, 2);
    }

    #[test]
    fn self_matchups_keep_both_sides() {
        let pair = vec![
            tagged_trajectory(3, Player::One),
            tagged_trajectory(3, Player::Two),
        ];
        let kept = filter_experience(&matchup(3, 3, false), pair);
        assert_eq!(kept.len(), 2);
    }
}

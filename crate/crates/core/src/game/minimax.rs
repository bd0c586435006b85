//! Exact game solving by memoized exhaustive negamax.
//!
//! Both bundled games are small enough to solve completely in seconds, which
//! makes this the ground truth that search quality, puzzle generation, and
//! training progress are measured against. Ties are never broken: the full
//! optimal-move set is returned.

use std::collections::{BTreeSet, HashMap};

use super::{GameState, MoveId};

/// Exact value for the player to move plus every move that attains it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    /// Game-theoretic value in {-1, 0, +1} from the mover's perspective.
    pub value: i8,
    /// All value-preserving moves; empty iff the position is terminal.
    pub optimal: BTreeSet<MoveId>,
}

/// Memoized solver. The memo is keyed on board + side to move, so one solver
/// instance can be reused across any number of queries for the same game.
/// Instances are cheap; concurrent callers should each hold their own.
#[derive(Default)]
pub struct MinimaxSolver {
    memo: HashMap<u64, i8>,
}

impl MinimaxSolver {
    pub fn new() -> MinimaxSolver {
        MinimaxSolver::default()
    }

    /// Exact value of `state` for the player to move.
    pub fn value(&mut self, state: &GameState) -> i8 {
        let key = state.state_key();
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = match state.outcome() {
            Some(outcome) => outcome.signed_for(state.to_move()),
            None => {
                let mut best = i8::MIN;
                for mv in state.legal_moves() {
                    let child = state.apply_move(mv).expect("legal move applies");
                    best = best.max(-self.value(&child));
                }
                best
            }
        };
        self.memo.insert(key, v);
        v
    }

    /// Value plus the complete optimal-move set.
    pub fn solve(&mut self, state: &GameState) -> SolveResult {
        let value = self.value(state);
        let mut optimal = BTreeSet::new();
        for mv in state.legal_moves() {
            let child = state.apply_move(mv).expect("legal move applies");
            if -self.value(&child) == value {
                optimal.insert(mv);
            }
        }
        SolveResult { value, optimal }
    }

    /// Number of distinct positions solved so far.
    pub fn solved_positions(&self) -> usize {
        self.memo.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{position_from_line, reachable_states, GameSpec, Outcome, Player};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tictactoe_is_a_draw_and_every_opening_preserves_it() {
        let mut solver = MinimaxSolver::new();
        let result = solver.solve(&GameState::initial(GameSpec::tictactoe()));
        assert_eq!(result.value, 0);
        assert_eq!(result.optimal.len(), 9);
    }

    #[test]
    fn immediate_win_is_found() {
        // X has two in a row on the top line and it is X's turn.
        let s = position_from_line("tictactoe XX.OO.... X").unwrap();
        let mut solver = MinimaxSolver::new();
        let result = solver.solve(&s);
        assert_eq!(result.value, 1);
        assert!(result.optimal.contains(&MoveId(2)));
    }

    #[test]
    fn position_one_ply_before_forced_loss_scores_minus_one() {
        // O to move; X threatens both cell 2 (first row) and cell 6 (first
        // column), and O has no counter-threat. No single reply saves O.
        let s = position_from_line("tictactoe XX.XO...O O").unwrap();
        let mut solver = MinimaxSolver::new();
        let result = solver.solve(&s);
        assert_eq!(result.value, -1);
        // Every move still loses, so every move is value-preserving.
        assert_eq!(result.optimal.len(), s.legal_moves().len());
    }

    #[test]
    fn terminal_positions_solve_to_their_outcome_with_no_moves() {
        let mut s = GameState::initial(GameSpec::tictactoe());
        for mv in [0, 3, 1, 4, 2] {
            s = s.apply_move(MoveId(mv)).unwrap();
        }
        assert_eq!(s.outcome(), Some(Outcome::Win(Player::One)));
        let mut solver = MinimaxSolver::new();
        let result = solver.solve(&s);
        // The winner just moved, so the player to move has lost.
        assert_eq!(result.value, -1);
        assert!(result.optimal.is_empty());
    }

    #[test]
    fn values_negate_under_player_swap() {
        let states = reachable_states(&GameSpec::tictactoe());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sample: Vec<_> = states.choose_multiple(&mut rng, 250).cloned().collect();
        let mut solver = MinimaxSolver::new();
        let from_p1 = |s: &GameState, mover_value: i8| {
            if s.to_move() == Player::One {
                mover_value
            } else {
                -mover_value
            }
        };
        for s in sample {
            let direct = solver.value(&s);
            let sw = s.swap_players();
            let swapped = solver.value(&sw);
            assert_eq!(direct, swapped, "mover value is mark-invariant");
            assert_eq!(
                from_p1(&s, direct),
                -from_p1(&sw, swapped),
                "first-player value negates under the perspective flip"
            );
        }
    }

    #[test]
    fn solver_memo_is_reused_across_queries() {
        let mut solver = MinimaxSolver::new();
        solver.value(&GameState::initial(GameSpec::tictactoe()));
        let solved = solver.solved_positions();
        assert!(solved > 4000, "full tree memoized, got {solved}");
        solver.value(&GameState::initial(GameSpec::tictactoe()));
        assert_eq!(solver.solved_positions(), solved);
    }
}

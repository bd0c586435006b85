//! Behavioral diversity for a team of latent-conditioned players.
//!
//! Each player `i` carries an expected-feature vector `ψ_i`: an exponential
//! moving average of the board features `φ(s, a)` encountered on the
//! player's own moves during self-play. Diversity between players is scored
//! by a repulsive/attractive polynomial in the distance from each player to
//! its nearest rival,
//!
//! ```text
//! Σ_i (1 − λ_i) · (0.5·d_i² − 0.2·d_i⁵ / ℓ0³),   d_i = ‖ψ_i − ψ_{j*_i}‖₂
//! ```
//!
//! whose gradient with respect to `ψ_i` gives the per-step intrinsic reward
//!
//! ```text
//! r_d(s, a) = (1 − (d/ℓ0)³) · φ(s, a) · (ψ_i − ψ_{j*_i}).
//! ```
//!
//! The utility is maximized when every player sits at distance `ℓ0` from its
//! nearest rival: closer pairs are pushed apart, farther pairs pulled back.
//! Player 0 always has `λ_0 = 1`, so it optimizes extrinsic reward only and
//! acts as the team's plain baseline.
//!
//! Intrinsic rewards accrue only on a player's own turns. Value targets for
//! the intrinsic head therefore stride two plies at a time:
//! `z_d(s_t) = Σ_{m=0}^{N_TD/2 − 1} r_d(s_{t+2m}) + v_d(s_{t+N_TD})`, with
//! the bootstrap dropped when the game ends inside the window.

use crate::game::{GameState, MoveId, Outcome, Player};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("player {player} out of range for a team of {n_players}")]
    PlayerOutOfRange { player: usize, n_players: usize },
    #[error("a team of one has no rival to measure against")]
    NoRival,
    #[error("feature vector has dimension {got}, team uses {expected}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("{name} = {value} is outside its valid range {range}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("intrinsic value targets need an even TD horizon, got {n_td}")]
    OddTdSteps { n_td: usize },
    #[error("step {t} out of range for a trajectory of {len} moves")]
    StepOutOfRange { t: usize, len: usize },
    #[error("step {t} is not a move of the trajectory owner")]
    NotOwnersTurn { t: usize },
}

/// One move of a finished self-play game, as recorded for learning.
///
/// `state` is the position before the move; `latent` is the team player who
/// chose it. `phi` is the feature map of `(state, mv)` and `r_d` the acting
/// player's intrinsic reward for that transition, both computed against the
/// team snapshot that was live during the game.
#[derive(Clone, Debug)]
pub struct TrajectoryStep {
    pub state: GameState,
    pub mv: MoveId,
    pub latent: usize,
    /// Search policy over the full move space (zero on illegal moves).
    pub pi: Vec<f64>,
    pub phi: Vec<f64>,
    pub r_d: f64,
}

/// A finished game tagged with the team player whose experience it is.
///
/// Both players' moves are kept (intrinsic value targets need the full
/// alternating sequence); `owner`/`owner_seat` say which side the record
/// belongs to. A game between players `i` and `j` yields two trajectories,
/// one per owner, sharing the same step content.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub owner: usize,
    pub owner_seat: Player,
    pub steps: Vec<TrajectoryStep>,
    pub outcome: Outcome,
}

impl Trajectory {
    /// Indices of the owner's own moves, in order.
    pub fn own_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.state.to_move() == self.owner_seat)
            .map(|(t, _)| t)
            .collect()
    }
}

/// Shared diversity state of a team: one `ψ` vector per player plus the
/// mixing weights and the equilibrium distance `ℓ0`.
///
/// Searches read a frozen clone of this; only the training loop writes it,
/// between games.
#[derive(Clone, Debug, PartialEq)]
pub struct TeamState {
    lambdas: Vec<f64>,
    psi: Vec<Vec<f64>>,
    ell0: f64,
    beta: f64,
}

impl TeamState {
    /// A team with zeroed `ψ` vectors and default knobs: `λ_i = 0.7` for
    /// `i > 0` (`λ_0` is pinned to 1), `ℓ0 = 0.3·√D`, EMA decay `β = 0.99`.
    pub fn new(n_players: usize, feature_dim: usize) -> TeamState {
        let mut lambdas = vec![0.7; n_players.max(1)];
        lambdas[0] = 1.0;
        TeamState {
            lambdas,
            psi: vec![vec![0.0; feature_dim]; n_players.max(1)],
            ell0: 0.3 * (feature_dim as f64).sqrt(),
            beta: 0.99,
        }
    }

    /// Set `λ_i` for every player except player 0, which stays at 1.
    pub fn set_lambda(&mut self, lambda: f64) -> Result<(), DiversityError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(DiversityError::InvalidParameter {
                name: "lambda",
                value: lambda,
                range: "[0, 1]",
            });
        }
        for l in self.lambdas.iter_mut().skip(1) {
            *l = lambda;
        }
        Ok(())
    }

    /// Set one player's λ. Player 0 is pinned to 1: setting it to anything
    /// else is an error.
    pub fn set_lambda_for(&mut self, i: usize, lambda: f64) -> Result<(), DiversityError> {
        self.check_player(i)?;
        if !(0.0..=1.0).contains(&lambda) || (i == 0 && lambda != 1.0) {
            return Err(DiversityError::InvalidParameter {
                name: "lambda",
                value: lambda,
                range: if i == 0 { "{1} for player 0" } else { "[0, 1]" },
            });
        }
        self.lambdas[i] = lambda;
        Ok(())
    }

    pub fn set_ell0(&mut self, ell0: f64) -> Result<(), DiversityError> {
        if !(ell0 > 0.0) || !ell0.is_finite() {
            return Err(DiversityError::InvalidParameter {
                name: "ell0",
                value: ell0,
                range: "(0, inf)",
            });
        }
        self.ell0 = ell0;
        Ok(())
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<(), DiversityError> {
        if !(0.0..1.0).contains(&beta) && beta != 1.0 {
            return Err(DiversityError::InvalidParameter {
                name: "beta",
                value: beta,
                range: "(0, 1]",
            });
        }
        self.beta = beta;
        Ok(())
    }

    /// Overwrite one `ψ` vector (reports: loading a checkpoint, tests).
    pub fn set_psi(&mut self, i: usize, psi: Vec<f64>) -> Result<(), DiversityError> {
        self.check_player(i)?;
        if psi.len() != self.feature_dim() {
            return Err(DiversityError::FeatureDimMismatch {
                expected: self.feature_dim(),
                got: psi.len(),
            });
        }
        self.psi[i] = psi;
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.lambdas.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.psi[0].len()
    }

    pub fn ell0(&self) -> f64 {
        self.ell0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn psi(&self, i: usize) -> &[f64] {
        &self.psi[i]
    }

    fn check_player(&self, i: usize) -> Result<(), DiversityError> {
        if i >= self.n_players() {
            return Err(DiversityError::PlayerOutOfRange {
                player: i,
                n_players: self.n_players(),
            });
        }
        Ok(())
    }

    /// Fold one finished game into `ψ_i`:
    /// `ψ_i ← β·ψ_i + (1−β)·mean(φ over player i's own moves)`.
    ///
    /// A trajectory in which player `i` never acted leaves `ψ_i` untouched.
    pub fn update_occupancy(
        &mut self,
        trajectory: &Trajectory,
        i: usize,
    ) -> Result<(), DiversityError> {
        self.check_player(i)?;
        let d = self.feature_dim();
        let mut mean = vec![0.0; d];
        let mut count = 0usize;
        for step in trajectory.steps.iter().filter(|s| s.latent == i) {
            if step.phi.len() != d {
                return Err(DiversityError::FeatureDimMismatch {
                    expected: d,
                    got: step.phi.len(),
                });
            }
            for (m, &x) in mean.iter_mut().zip(&step.phi) {
                *m += x;
            }
            count += 1;
        }
        if count == 0 {
            return Ok(());
        }
        let inv = 1.0 / count as f64;
        for (p, m) in self.psi[i].iter_mut().zip(&mean) {
            *p = self.beta * *p + (1.0 - self.beta) * m * inv;
        }
        Ok(())
    }

    /// The player nearest to `i` in `ψ`-space (squared Euclidean distance),
    /// ties resolved toward the smallest index.
    pub fn nearest_rival(&self, i: usize) -> Result<usize, DiversityError> {
        self.check_player(i)?;
        if self.n_players() < 2 {
            return Err(DiversityError::NoRival);
        }
        let mut best = usize::MAX;
        let mut best_d2 = f64::INFINITY;
        for j in 0..self.n_players() {
            if j == i {
                continue;
            }
            let d2 = squared_distance(&self.psi[i], &self.psi[j]);
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        Ok(best)
    }

    /// The team's diversity utility,
    /// `Σ_i (1 − λ_i)(0.5·d_i² − 0.2·d_i⁵/ℓ0³)` with `d_i` the distance from
    /// `ψ_i` to its nearest rival. Reporting/testing only; training consumes
    /// the gradient through [`intrinsic_reward`].
    pub fn diversity_utility(&self) -> f64 {
        if self.n_players() < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..self.n_players() {
            let weight = 1.0 - self.lambdas[i];
            if weight == 0.0 {
                continue;
            }
            let j = self.nearest_rival(i).expect("n_players >= 2");
            let d = squared_distance(&self.psi[i], &self.psi[j]).sqrt();
            total += weight * pair_utility(d, self.ell0);
        }
        total
    }

    /// Intrinsic reward of player `i` for a transition with features `phi`,
    /// measured against the current `ψ` snapshot. A team of one has no rival
    /// and earns 0.
    pub fn reward_for(&self, i: usize, phi: &[f64]) -> Result<f64, DiversityError> {
        self.check_player(i)?;
        if self.n_players() < 2 {
            return Ok(0.0);
        }
        if phi.len() != self.feature_dim() {
            return Err(DiversityError::FeatureDimMismatch {
                expected: self.feature_dim(),
                got: phi.len(),
            });
        }
        let j = self.nearest_rival(i)?;
        Ok(intrinsic_reward(phi, &self.psi[i], &self.psi[j], self.ell0))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One player's utility term as a function of its rival distance:
/// `0.5·d² − 0.2·d⁵/ℓ0³`, maximal at `d = ℓ0`.
pub fn pair_utility(d: f64, ell0: f64) -> f64 {
    0.5 * d * d - 0.2 * d.powi(5) / ell0.powi(3)
}

/// Gradient of [`pair_utility`] with respect to `ψ_i`, contracted with the
/// transition features: `(1 − (d/ℓ0)³) · φ · (ψ_i − ψ_{j*})`. Zero both when
/// the players coincide and on the equilibrium sphere `d = ℓ0`; negative
/// past it (the attractive force pulling the pair back together).
pub fn intrinsic_reward(phi: &[f64], psi_i: &[f64], psi_j: &[f64], ell0: f64) -> f64 {
    debug_assert_eq!(phi.len(), psi_i.len());
    debug_assert_eq!(psi_i.len(), psi_j.len());
    let d = squared_distance(psi_i, psi_j).sqrt();
    let coefficient = 1.0 - (d / ell0).powi(3);
    let mut dot = 0.0;
    for ((&f, &a), &b) in phi.iter().zip(psi_i).zip(psi_j) {
        dot += f * (a - b);
    }
    coefficient * dot
}

/// The reward a player actually optimizes: `(1−λ)·r_d + λ·r_e`. At `λ = 1`
/// this is the extrinsic reward exactly (player 0's case), at `λ = 0` the
/// intrinsic reward exactly.
pub fn combined_reward(r_d: f64, r_e: f64, lambda: f64) -> f64 {
    (1.0 - lambda) * r_d + lambda * r_e
}

/// `N_TD`-step target for the intrinsic value head at the owner's move `t`:
/// the owner's own-turn rewards `r_d(s_{t+2m})`, `m = 0 .. N_TD/2 − 1`, plus
/// the bootstrap `v_d(s_{t+N_TD})`. Opponent turns contribute nothing (the
/// stride skips them), and when the game ends inside the window the sum
/// truncates at the terminal with a zero bootstrap.
///
/// `v_d_at_step(k)` supplies the bootstrap evaluation at step index `k`; it
/// is only called with `k = t + N_TD` when that step exists, and `k` then
/// shares `t`'s parity.
pub fn intrinsic_value_target(
    trajectory: &Trajectory,
    t: usize,
    n_td: usize,
    v_d_at_step: impl Fn(usize) -> f64,
) -> Result<f64, DiversityError> {
    if n_td == 0 || n_td % 2 != 0 {
        return Err(DiversityError::OddTdSteps { n_td });
    }
    let len = trajectory.steps.len();
    if t >= len {
        return Err(DiversityError::StepOutOfRange { t, len });
    }
    if trajectory.steps[t].state.to_move() != trajectory.owner_seat {
        return Err(DiversityError::NotOwnersTurn { t });
    }
    let mut target = 0.0;
    for m in 0..n_td / 2 {
        let k = t + 2 * m;
        if k >= len {
            break;
        }
        target += trajectory.steps[k].r_d;
    }
    let boot = t + n_td;
    if boot < len {
        target += v_d_at_step(boot);
    }
    Ok(target)
}

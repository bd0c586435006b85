//! Network input planes and the behavioral feature map.

use super::{GameError, GameState, MoveId, Player};

/// Stack of input planes for an evaluator, each `cells` long:
/// two occupancy planes for the current board, two per retained history
/// board (zero-filled when that much history does not exist yet), one
/// side-to-move plane, then one constant plane per latent (exactly one of
/// which is all ones).
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneStack {
    pub planes: Vec<Vec<f64>>,
    pub cells: usize,
    /// Half-open plane index range holding the history planes.
    pub history_planes: (usize, usize),
}

impl PlaneStack {
    pub fn n_planes(&self) -> usize {
        self.planes.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.planes.len() * self.cells);
        for p in &self.planes {
            out.extend_from_slice(p);
        }
        out
    }
}

/// Number of planes [`encode_planes`] produces for a game with history `h`
/// and `n_players` latents.
pub fn plane_count(history_len: usize, n_players: usize) -> usize {
    2 + 2 * history_len + 1 + n_players
}

fn occupancy(board: &[Option<Player>], player: Player) -> Vec<f64> {
    board
        .iter()
        .map(|c| if *c == Some(player) { 1.0 } else { 0.0 })
        .collect()
}

/// Encode a position for the evaluator, conditioned on a latent index.
pub fn encode_planes(
    state: &GameState,
    latent: usize,
    n_players: usize,
) -> Result<PlaneStack, GameError> {
    if latent >= n_players {
        return Err(GameError::LatentOutOfRange { latent, n_players });
    }
    let spec = state.spec();
    let cells = spec.cell_count();
    let mut planes = Vec::with_capacity(plane_count(spec.history_len, n_players));
    planes.push(occupancy(state.cells(), Player::One));
    planes.push(occupancy(state.cells(), Player::Two));
    for h in 0..spec.history_len {
        match state.history().get(h) {
            Some(board) => {
                planes.push(occupancy(board, Player::One));
                planes.push(occupancy(board, Player::Two));
            }
            None => {
                planes.push(vec![0.0; cells]);
                planes.push(vec![0.0; cells]);
            }
        }
    }
    let stm = if state.to_move() == Player::One {
        1.0
    } else {
        0.0
    };
    planes.push(vec![stm; cells]);
    for j in 0..n_players {
        let fill = if j == latent { 1.0 } else { 0.0 };
        planes.push(vec![fill; cells]);
    }
    Ok(PlaneStack {
        planes,
        cells,
        history_planes: (2, 2 + 2 * spec.history_len),
    })
}

/// Behavioral feature of a state-action pair: per-cell occupancy indicators
/// of the board reached after taking the move, one block per player. The
/// feature deliberately sees only the successor board, never history,
/// side-to-move, or counters.
pub fn feature_map(state: &GameState, mv: MoveId) -> Result<Vec<f64>, GameError> {
    let next = state.apply_move(mv)?;
    let mut phi = occupancy(next.cells(), Player::One);
    phi.extend(occupancy(next.cells(), Player::Two));
    Ok(phi)
}

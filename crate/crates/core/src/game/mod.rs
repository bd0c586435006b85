//! Board games, rules, and exact solving.
//!
//! Everything downstream (search, evaluators, puzzles) reads game geometry
//! through [`GameSpec`] and manipulates positions through [`GameState`]; no
//! other module hard-codes board sizes or win conditions.

mod encode;
mod enumerate;
mod minimax;
mod text;

pub use encode::{encode_planes, feature_map, plane_count, PlaneStack};
pub use enumerate::{for_each_reachable, reachable_states};
pub use minimax::{MinimaxSolver, SolveResult};
pub use text::{position_from_line, position_to_line};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("illegal move {mv} in position '{pos}'")]
    IllegalMove { mv: usize, pos: String },
    #[error("cannot move in terminal position '{pos}'")]
    TerminalPosition { pos: String },
    #[error("unknown game id '{0}'")]
    UnknownGame(String),
    #[error("malformed position line '{line}': {reason}")]
    MalformedPosition { line: String, reason: String },
    #[error("latent index {latent} out of range for {n_players} players")]
    LatentOutOfRange { latent: usize, n_players: usize },
}

/// The two seats. `One` always moves first from the initial position and is
/// rendered as `X` in the text format; `Two` is rendered as `O`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn mark(self) -> char {
        match self {
            Player::One => 'X',
            Player::Two => 'O',
        }
    }

    pub fn from_mark(c: char) -> Option<Player> {
        match c {
            'X' => Some(Player::One),
            'O' => Some(Player::Two),
            _ => None,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mark())
    }
}

/// Index into a game's fixed move space: the target cell for tic-tac-toe,
/// the drop column for connect-four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MoveId(pub usize);

impl fmt::Display for MoveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of a finished game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Win(Player),
    Draw,
}

impl Outcome {
    /// Score in {-1, 0, +1} from `player`'s perspective.
    pub fn signed_for(self, player: Player) -> i8 {
        match self {
            Outcome::Draw => 0,
            Outcome::Win(w) if w == player => 1,
            Outcome::Win(_) => -1,
        }
    }

    pub fn score_for(self, player: Player) -> f64 {
        f64::from(self.signed_for(player))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GameKind {
    TicTacToe,
    ConnectFour,
}

/// Static geometry of a game: board size, win condition, move semantics,
/// plus the knobs that ride along with the game everywhere (history length
/// for plane encoding, the per-game temperature cutoff).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GameSpec {
    pub kind: GameKind,
    pub width: usize,
    pub height: usize,
    pub win_length: usize,
    /// Number of prior boards kept for plane encoding (H). Default 0.
    pub history_len: usize,
    /// Move number from which action selection turns greedy.
    pub temperature_cutoff: usize,
}

impl GameSpec {
    /// 3x3 board, three in a row wins, nine cell moves.
    pub fn tictactoe() -> GameSpec {
        GameSpec {
            kind: GameKind::TicTacToe,
            width: 3,
            height: 3,
            win_length: 3,
            history_len: 0,
            temperature_cutoff: 6,
        }
    }

    /// 5 columns x 4 rows, four in a row wins, five column moves with
    /// gravity (row 0 is the bottom row).
    pub fn connect_four() -> GameSpec {
        GameSpec {
            kind: GameKind::ConnectFour,
            width: 5,
            height: 4,
            win_length: 4,
            history_len: 0,
            temperature_cutoff: 8,
        }
    }

    pub fn with_history(mut self, history_len: usize) -> GameSpec {
        self.history_len = history_len;
        self
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    /// Size of the fixed move space (not the number of currently legal moves).
    pub fn move_space(&self) -> usize {
        match self.kind {
            GameKind::TicTacToe => self.cell_count(),
            GameKind::ConnectFour => self.width,
        }
    }

    /// Dimension of the behavioral feature map: one occupancy block per player.
    pub fn feature_dim(&self) -> usize {
        2 * self.cell_count()
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GameKind::TicTacToe => "tictactoe",
            GameKind::ConnectFour => "connect4",
        }
    }

    pub fn from_name(name: &str) -> Result<GameSpec, GameError> {
        match name {
            "tictactoe" => Ok(GameSpec::tictactoe()),
            "connect4" => Ok(GameSpec::connect_four()),
            other => Err(GameError::UnknownGame(other.to_string())),
        }
    }

    /// All win-length windows as cell-index slices, row-major rows, columns,
    /// and both diagonal directions.
    pub fn win_windows(&self) -> Vec<Vec<usize>> {
        let (w, h, k) = (self.width, self.height, self.win_length);
        let idx = |row: usize, col: usize| row * w + col;
        let mut windows = Vec::new();
        for row in 0..h {
            for col in 0..=w.saturating_sub(k) {
                windows.push((0..k).map(|i| idx(row, col + i)).collect());
            }
        }
        for col in 0..w {
            for row in 0..=h.saturating_sub(k) {
                windows.push((0..k).map(|i| idx(row + i, col)).collect());
            }
        }
        for row in 0..=h.saturating_sub(k) {
            for col in 0..=w.saturating_sub(k) {
                windows.push((0..k).map(|i| idx(row + i, col + i)).collect());
                windows.push((0..k).map(|i| idx(row + i, col + k - 1 - i)).collect());
            }
        }
        windows
    }
}

/// Win-window tables are consulted on every move application; build them
/// once per game kind. Board geometry is fixed per kind, so this is sound.
fn cached_windows(spec: &GameSpec) -> &'static [Vec<usize>] {
    use std::sync::OnceLock;
    static TTT: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
    static C4: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
    match spec.kind {
        GameKind::TicTacToe => TTT.get_or_init(|| GameSpec::tictactoe().win_windows()),
        GameKind::ConnectFour => C4.get_or_init(|| GameSpec::connect_four().win_windows()),
    }
}

pub type Board = Vec<Option<Player>>;

/// A position: board cells (row-major, row 0 first), player to move, move
/// count, and up to `history_len` prior boards (most recent first).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    spec: GameSpec,
    cells: Board,
    to_move: Player,
    move_count: u32,
    history: Vec<Board>,
}

impl GameState {
    pub fn initial(spec: GameSpec) -> GameState {
        GameState {
            spec,
            cells: vec![None; spec.cell_count()],
            to_move: Player::One,
            move_count: 0,
            history: Vec::new(),
        }
    }

    /// Rebuild a position from raw cells. Move count is the piece count and
    /// history starts empty.
    pub fn from_cells(spec: GameSpec, cells: Board, to_move: Player) -> GameState {
        let move_count = cells.iter().filter(|c| c.is_some()).count() as u32;
        GameState {
            spec,
            cells,
            to_move,
            move_count,
            history: Vec::new(),
        }
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn cells(&self) -> &[Option<Player>] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<Player> {
        self.cells[row * self.spec.width + col]
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn move_count(&self) -> u32 {
        self.move_count
    }

    pub fn history(&self) -> &[Board] {
        &self.history
    }

    /// Legal moves in ascending [`MoveId`] order; empty iff terminal.
    pub fn legal_moves(&self) -> Vec<MoveId> {
        if self.outcome().is_some() {
            return Vec::new();
        }
        match self.spec.kind {
            GameKind::TicTacToe => (0..self.cells.len())
                .filter(|&i| self.cells[i].is_none())
                .map(MoveId)
                .collect(),
            GameKind::ConnectFour => (0..self.spec.width)
                .filter(|&col| self.drop_row(col).is_some())
                .map(MoveId)
                .collect(),
        }
    }

    pub fn is_legal(&self, mv: MoveId) -> bool {
        if mv.0 >= self.spec.move_space() || self.outcome().is_some() {
            return false;
        }
        match self.spec.kind {
            GameKind::TicTacToe => self.cells[mv.0].is_none(),
            GameKind::ConnectFour => self.drop_row(mv.0).is_some(),
        }
    }

    fn drop_row(&self, col: usize) -> Option<usize> {
        (0..self.spec.height).find(|&row| self.cells[row * self.spec.width + col].is_none())
    }

    /// Apply a move, returning the successor. The current position must be
    /// non-terminal and the move legal.
    pub fn apply_move(&self, mv: MoveId) -> Result<GameState, GameError> {
        if self.outcome().is_some() {
            return Err(GameError::TerminalPosition {
                pos: position_to_line(self),
            });
        }
        if mv.0 >= self.spec.move_space() || !self.is_legal(mv) {
            return Err(GameError::IllegalMove {
                mv: mv.0,
                pos: position_to_line(self),
            });
        }
        let target = match self.spec.kind {
            GameKind::TicTacToe => mv.0,
            GameKind::ConnectFour => {
                let row = self.drop_row(mv.0).expect("legal drop has an open row");
                row * self.spec.width + mv.0
            }
        };
        let mut next = self.clone();
        if self.spec.history_len > 0 {
            next.history.insert(0, self.cells.clone());
            next.history.truncate(self.spec.history_len);
        }
        next.cells[target] = Some(self.to_move);
        next.to_move = self.to_move.other();
        next.move_count += 1;
        Ok(next)
    }

    /// `Some` iff the game is over: a completed win window or a full board.
    pub fn outcome(&self) -> Option<Outcome> {
        for window in cached_windows(&self.spec) {
            if let Some(p) = self.cells[window[0]] {
                if window.iter().all(|&i| self.cells[i] == Some(p)) {
                    return Some(Outcome::Win(p));
                }
            }
        }
        if self.cells.iter().all(|c| c.is_some()) {
            Some(Outcome::Draw)
        } else {
            None
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome().is_some()
    }

    /// Compact board+mover key: two bits per cell plus a side bit. History
    /// is deliberately excluded; rules and values do not depend on it.
    pub fn state_key(&self) -> u64 {
        let mut key: u64 = 0;
        for cell in &self.cells {
            key <<= 2;
            key |= match cell {
                None => 0,
                Some(Player::One) => 1,
                Some(Player::Two) => 2,
            };
        }
        (key << 1)
            | match self.to_move {
                Player::One => 0,
                Player::Two => 1,
            }
    }

    /// Mirror position with the two players' marks and the side to move
    /// exchanged. Useful for zero-sum symmetry checks.
    pub fn swap_players(&self) -> GameState {
        let swap = |b: &Board| b.iter().map(|c| c.map(Player::other)).collect::<Board>();
        GameState {
            spec: self.spec,
            cells: swap(&self.cells),
            to_move: self.to_move.other(),
            move_count: self.move_count,
            history: self.history.iter().map(|b| swap(b)).collect(),
        }
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Rows printed top row last-indexed first so gravity games read
        // naturally (checkers pile toward the bottom line of the printout).
        for row in (0..self.spec.height).rev() {
            for col in 0..self.spec.width {
                let c = match self.cell(row, col) {
                    None => '.',
                    Some(p) => p.mark(),
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{} to move", self.to_move)
    }
}

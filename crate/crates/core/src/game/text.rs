//! One-line text form for positions: `<game> <cells> <to-move>`.
//!
//! Cells are listed in cell-index order (row-major, row 0 first) using `.`,
//! `X`, and `O`; the final field is the mark of the player to move. The
//! format round-trips bit-exactly and is shared by puzzle files, opening
//! books, and the CLI.

use super::{Board, GameError, GameSpec, GameState, Player};

pub fn position_to_line(state: &GameState) -> String {
    let cells: String = state
        .cells()
        .iter()
        .map(|c| match c {
            None => '.',
            Some(p) => p.mark(),
        })
        .collect();
    format!("{} {} {}", state.spec().name(), cells, state.to_move())
}

pub fn position_from_line(line: &str) -> Result<GameState, GameError> {
    let malformed = |reason: &str| GameError::MalformedPosition {
        line: line.to_string(),
        reason: reason.to_string(),
    };
    let mut parts = line.split_whitespace();
    let game = parts.next().ok_or_else(|| malformed("empty line"))?;
    let cells_str = parts.next().ok_or_else(|| malformed("missing cells"))?;
    let mover_str = parts
        .next()
        .ok_or_else(|| malformed("missing player to move"))?;
    if parts.next().is_some() {
        return Err(malformed("trailing fields"));
    }
    let spec = GameSpec::from_name(game).map_err(|_| malformed("unknown game id"))?;
    if cells_str.chars().count() != spec.cell_count() {
        return Err(malformed(&format!(
            "expected {} cells, found {}",
            spec.cell_count(),
            cells_str.chars().count()
        )));
    }
    let mut cells: Board = Vec::with_capacity(spec.cell_count());
    for c in cells_str.chars() {
        match c {
            '.' => cells.push(None),
            _ => match Player::from_mark(c) {
                Some(p) => cells.push(Some(p)),
                None => return Err(malformed(&format!("invalid cell character '{c}'"))),
            },
        }
    }
    let mover = match mover_str {
        "X" => Player::One,
        "O" => Player::Two,
        other => return Err(malformed(&format!("invalid player to move '{other}'"))),
    };
    Ok(GameState::from_cells(spec, cells, mover))
}

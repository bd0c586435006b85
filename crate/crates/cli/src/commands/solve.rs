//! `polyzero solve`: ask the exact solver about one position.

use std::fmt::Write as _;

use polyzero::{position_from_line, GameState, MinimaxSolver, Outcome, Player};

use super::{parse_game, usage, CliError, OutDir};
use crate::manifest::ExperimentManifest;
use crate::SolveArgs;

fn answer(state: &GameState) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "position {}", polyzero::position_to_line(state));
    if let Some(outcome) = state.outcome() {
        let verdict = match outcome {
            Outcome::Win(Player::One) => "X has won",
            Outcome::Win(Player::Two) => "O has won",
            Outcome::Draw => "drawn",
        };
        let _ = writeln!(text, "terminal: {verdict}");
        return text;
    }
    let mut solver = MinimaxSolver::new();
    let result = solver.solve(state);
    let verdict = match result.value {
        1 => "win for the side to move",
        0 => "draw",
        _ => "loss for the side to move",
    };
    let _ = writeln!(text, "value {} ({verdict})", result.value);
    let moves: Vec<String> = result.optimal.iter().map(|m| m.0.to_string()).collect();
    let _ = writeln!(text, "optimal moves: {}", moves.join(" "));
    let _ = writeln!(text, "positions solved: {}", solver.solved_positions());
    text
}

pub fn run(args: SolveArgs) -> Result<(), CliError> {
    let state = match (&args.position, &args.game) {
        (Some(line), _) => position_from_line(line).map_err(|e| usage(e.to_string()))?,
        (None, Some(game)) => GameState::initial(parse_game(game)?),
        (None, None) => return Err(usage("give --position or --game")),
    };
    let text = answer(&state);
    print!("{text}");
    if let Some(dir) = &args.out {
        let mut out = OutDir::create(dir)?;
        out.write("solve.txt", &text)?;
        let mut manifest = ExperimentManifest::new("solve", 0);
        manifest.setting(
            "position",
            polyzero::position_to_line(&state),
        );
        out.finish(manifest)?;
    }
    Ok(())
}

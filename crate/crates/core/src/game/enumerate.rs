//! Exhaustive enumeration of reachable positions.

use std::collections::HashSet;

use super::{GameSpec, GameState};

/// Visit every position reachable from the initial one under legal play
/// (terminals included), each exactly once, in deterministic depth-first
/// order with moves explored in ascending id order.
pub fn for_each_reachable<F: FnMut(&GameState)>(spec: &GameSpec, mut visit: F) {
    let mut seen: HashSet<u64> = HashSet::new();
    let root = GameState::initial(*spec);
    seen.insert(root.state_key());
    let mut stack = vec![root];
    while let Some(state) = stack.pop() {
        visit(&state);
        // Push children in reverse so they pop in ascending move order.
        for mv in state.legal_moves().into_iter().rev() {
            let child = state.apply_move(mv).expect("legal move applies");
            if seen.insert(child.state_key()) {
                stack.push(child);
            }
        }
    }
}

/// Materialized variant of [`for_each_reachable`]; fine for tic-tac-toe,
/// prefer the visitor for larger state spaces.
pub fn reachable_states(spec: &GameSpec) -> Vec<GameState> {
    let mut out = Vec::new();
    for_each_reachable(spec, |s| out.push(s.clone()));
    out
}

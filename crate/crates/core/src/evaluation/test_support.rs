//! Shared test doubles for the evaluation suite.

use std::sync::Mutex;

use crate::evaluator::{EvalError, EvalOutput, Evaluate};
use crate::game::{GameState, MinimaxSolver};

/// Exact evaluator: values straight from the solver, uniform priors.
/// Search backed by it plays perfectly once simulations separate the
/// optimal moves. One latent-free brain for any team size.
pub(crate) struct OracleEval {
    solver: Mutex<MinimaxSolver>,
}

impl OracleEval {
    pub(crate) fn new() -> OracleEval {
        OracleEval {
            solver: Mutex::new(MinimaxSolver::new()),
        }
    }
}

impl Evaluate for OracleEval {
    fn evaluate(&self, state: &GameState, _latent: usize) -> Result<EvalOutput, EvalError> {
        let legal = state.legal_moves();
        let mut p = vec![0.0; state.spec().move_space()];
        for &m in &legal {
            p[m.0] = 1.0 / legal.len() as f64;
        }
        let v = f64::from(self.solver.lock().unwrap().value(state));
        Ok(EvalOutput { p, v, v_d: 0.0 })
    }

    fn n_players(&self) -> usize {
        usize::MAX
    }
}

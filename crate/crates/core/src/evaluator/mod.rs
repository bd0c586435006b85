//! Position evaluators: a latent-conditioned policy/value/intrinsic-value
//! function behind a common trait, with a tabular and an MLP backend.
//!
//! Both backends train against the same loss, so they are interchangeable in
//! the training loop:
//!
//! ```text
//! loss = (z - v)^2 + w_d * (z_d - v_d)^2 - sum_a pi_a * ln p_a  (+ l2 * |W|^2)
//! ```
//!
//! Policies are masked to legal moves and renormalized before anything else
//! sees them, so the policy head output is a valid distribution on every
//! call.

pub(crate) mod checkpoint;
mod mlp;
mod tabular;

pub use checkpoint::{
    load_params, load_params_from, save_params, save_params_to, CheckpointError,
};
pub use mlp::{Dense, MlpParams};
pub use tabular::TabularParams;

use thiserror::Error;

use crate::game::{GameSpec, GameState};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot evaluate terminal position '{0}'")]
    TerminalState(String),
    #[error("latent index {latent} out of range for {n_players} players")]
    LatentOutOfRange { latent: usize, n_players: usize },
    #[error("evaluator built for game '{expected}' got position of game '{found}'")]
    GameMismatch { expected: String, found: String },
    #[error("evaluator expects input dimension {expected}, position encodes to {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bad training target: {0}")]
    BadTarget(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
}

/// Evaluation of one position under one latent.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutput {
    /// Move priors over the game's full move space: zero on illegal moves,
    /// summing to one over the legal ones.
    pub p: Vec<f64>,
    /// Expected game outcome from the mover's perspective, in [-1, 1].
    pub v: f64,
    /// Expected intrinsic (diversity) return for the conditioning latent.
    pub v_d: f64,
}

/// Anything that can evaluate positions for a team of latent-indexed agents.
/// Kept object-safe so tests can interpose instrumented wrappers.
pub trait Evaluate {
    fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError>;
    fn n_players(&self) -> usize;
}

/// One training example: the searched position plus its targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainTarget {
    pub latent: usize,
    /// Visit distribution over the full move space (zeros on illegal moves).
    pub pi: Vec<f64>,
    /// Final outcome from this position's mover perspective.
    pub z: f64,
    /// Truncated intrinsic return target.
    pub z_d: f64,
}

pub type Batch = [(GameState, TrainTarget)];

/// Loss weighting knobs shared by both backends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Weight on the intrinsic value term.
    pub intrinsic_weight: f64,
    /// L2 coefficient on dense weights. The tabular backend keeps its
    /// entries unregularized; this applies to the MLP only.
    pub l2: f64,
}

impl Default for LossConfig {
    fn default() -> LossConfig {
        LossConfig {
            intrinsic_weight: 1.0,
            l2: 1e-4,
        }
    }
}

/// Probabilities are clamped here before taking logs.
pub const POLICY_LOG_CLAMP: f64 = 1e-12;

/// Decomposed batch loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub value: f64,
    pub intrinsic: f64,
    pub policy: f64,
    pub l2: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.value + self.intrinsic + self.policy + self.l2
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvaluatorParams {
    Tabular(TabularParams),
    Mlp(MlpParams),
}

impl EvaluatorParams {
    pub fn n_players(&self) -> usize {
        match self {
            EvaluatorParams::Tabular(t) => t.n_players(),
            EvaluatorParams::Mlp(m) => m.n_players(),
        }
    }

    pub fn game_name(&self) -> &str {
        match self {
            EvaluatorParams::Tabular(t) => t.game_name(),
            EvaluatorParams::Mlp(m) => m.game_name(),
        }
    }

    pub fn spec(&self) -> &GameSpec {
        match self {
            EvaluatorParams::Tabular(t) => t.spec(),
            EvaluatorParams::Mlp(m) => m.spec(),
        }
    }

    pub fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError> {
        match self {
            EvaluatorParams::Tabular(t) => t.evaluate(state, latent),
            EvaluatorParams::Mlp(m) => m.evaluate(state, latent),
        }
    }

    /// Mean decomposed loss of a batch at the current parameters.
    pub fn loss(&self, batch: &Batch, cfg: &LossConfig) -> Result<LossParts, EvalError> {
        match self {
            EvaluatorParams::Tabular(t) => t.loss(batch, cfg),
            EvaluatorParams::Mlp(m) => m.loss(batch, cfg),
        }
    }
}

impl Evaluate for EvaluatorParams {
    fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError> {
        EvaluatorParams::evaluate(self, state, latent)
    }

    fn n_players(&self) -> usize {
        EvaluatorParams::n_players(self)
    }
}

impl Evaluate for TabularParams {
    fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError> {
        TabularParams::evaluate(self, state, latent)
    }

    fn n_players(&self) -> usize {
        TabularParams::n_players(self)
    }
}

impl Evaluate for MlpParams {
    fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError> {
        MlpParams::evaluate(self, state, latent)
    }

    fn n_players(&self) -> usize {
        MlpParams::n_players(self)
    }
}

/// SGD with momentum on the MLP backend; the tabular backend takes plain
/// gradient steps on the touched entries (a momentum buffer over a growing
/// sparse table is not meaningful).
pub struct Optimizer {
    momentum: f64,
    velocity: Option<mlp::MlpGrads>,
}

impl Optimizer {
    pub fn new(momentum: f64) -> Optimizer {
        Optimizer {
            momentum,
            velocity: None,
        }
    }

    /// One gradient step at learning rate `lr`. Returns the loss measured
    /// before the step. `lr == 0` leaves parameters bitwise unchanged.
    pub fn step(
        &mut self,
        params: &mut EvaluatorParams,
        batch: &Batch,
        lr: f64,
        cfg: &LossConfig,
    ) -> Result<LossParts, EvalError> {
        self.step_impl(params, batch, None, lr, cfg)
    }

    /// [`step`](Optimizer::step) with pre-encoded network inputs replacing
    /// the states' own encodings (history dropout). The tabular backend has
    /// no encoded input and ignores them.
    pub fn step_with_inputs(
        &mut self,
        params: &mut EvaluatorParams,
        batch: &Batch,
        inputs: &[Vec<f64>],
        lr: f64,
        cfg: &LossConfig,
    ) -> Result<LossParts, EvalError> {
        self.step_impl(params, batch, Some(inputs), lr, cfg)
    }

    fn step_impl(
        &mut self,
        params: &mut EvaluatorParams,
        batch: &Batch,
        inputs: Option<&[Vec<f64>]>,
        lr: f64,
        cfg: &LossConfig,
    ) -> Result<LossParts, EvalError> {
        match params {
            EvaluatorParams::Tabular(t) => t.sgd_step(batch, lr, cfg),
            EvaluatorParams::Mlp(m) => {
                let (parts, grads) = match inputs {
                    Some(inputs) => m.loss_and_grads_with_inputs(batch, inputs, cfg)?,
                    None => m.loss_and_grads(batch, cfg)?,
                };
                let velocity = self
                    .velocity
                    .get_or_insert_with(|| mlp::MlpGrads::zeros_like(m));
                velocity.accumulate_momentum(&grads, self.momentum);
                if lr != 0.0 {
                    m.apply_step(velocity, lr);
                }
                Ok(parts)
            }
        }
    }
}

/// Masked softmax over legal moves: returns a vector over the full move
/// space that is zero on illegal moves and a proper distribution over legal
/// ones. `legal` must be non-empty.
pub(crate) fn masked_softmax(logits: &[f64], legal: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    let max = legal
        .iter()
        .map(|&a| logits[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for &a in legal {
        let e = (logits[a] - max).exp();
        out[a] = e;
        total += e;
    }
    for &a in legal {
        out[a] /= total;
    }
    out
}

/// Shared target validation: π shape and support, finite scalars.
pub(crate) fn check_target(
    state: &GameState,
    target: &TrainTarget,
    n_players: usize,
) -> Result<Vec<usize>, EvalError> {
    if target.latent >= n_players {
        return Err(EvalError::LatentOutOfRange {
            latent: target.latent,
            n_players,
        });
    }
    let move_space = state.spec().move_space();
    if target.pi.len() != move_space {
        return Err(EvalError::BadTarget(format!(
            "pi length {} does not match move space {move_space}",
            target.pi.len()
        )));
    }
    let legal: Vec<usize> = state.legal_moves().iter().map(|m| m.0).collect();
    if legal.is_empty() {
        return Err(EvalError::TerminalState(crate::game::position_to_line(
            state,
        )));
    }
    let mut sum = 0.0;
    for (a, &w) in target.pi.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(EvalError::BadTarget(format!("pi[{a}] = {w}")));
        }
        if w > 0.0 && !legal.contains(&a) {
            return Err(EvalError::BadTarget(format!(
                "pi places mass {w} on illegal move {a}"
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EvalError::BadTarget(format!("pi sums to {sum}")));
    }
    if !target.z.is_finite() || !target.z_d.is_finite() {
        return Err(EvalError::BadTarget("non-finite z or z_d".to_string()));
    }
    Ok(legal)
}

/// Per-sample loss pieces given the (already masked) policy `p`.
pub(crate) fn sample_loss(
    p: &[f64],
    v: f64,
    v_d: f64,
    target: &TrainTarget,
    cfg: &LossConfig,
) -> (f64, f64, f64) {
    let value = (target.z - v).powi(2);
    let intrinsic = cfg.intrinsic_weight * (target.z_d - v_d).powi(2);
    let mut policy = 0.0;
    for (a, &pi_a) in target.pi.iter().enumerate() {
        if pi_a > 0.0 {
            policy -= pi_a * p[a].max(POLICY_LOG_CLAMP).ln();
        }
    }
    (value, intrinsic, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameSpec, GameState, MoveId};

    fn ttt_batch_entry(z: f64) -> (GameState, TrainTarget) {
        let s = GameState::initial(GameSpec::tictactoe());
        let mut pi = vec![0.0; 9];
        pi[0] = 0.5;
        pi[4] = 0.5;
        (
            s,
            TrainTarget {
                latent: 0,
                pi,
                z,
                z_d: 0.0,
            },
        )
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        // One legal move left: p is forced to be one-hot, and we pin v, v_d.
        let s = crate::game::position_from_line("tictactoe XOXXXOO.O X").unwrap();
        assert_eq!(s.legal_moves(), vec![MoveId(7)]);
        let mut pi = vec![0.0; 9];
        pi[7] = 1.0;
        let mut tab = TabularParams::new(GameSpec::tictactoe(), 1);
        tab.set_entry(&s, 0, vec![0.0; 9], 0.0, 0.0);
        let params = EvaluatorParams::Tabular(tab);
        let batch = vec![(
            s,
            TrainTarget {
                latent: 0,
                pi,
                z: 0.0,
                z_d: 0.0,
            },
        )];
        let cfg = LossConfig::default();
        let parts = params.loss(&batch, &cfg).unwrap();
        assert_eq!(parts.total(), 0.0);
    }

    #[test]
    fn mismatched_value_and_uniform_policy_loss() {
        // z = 1 vs v = 0 plus a uniform-over-two-moves cross entropy:
        // 1 + ln 2.
        let s = crate::game::position_from_line("tictactoe XOXXXO..O O").unwrap();
        assert_eq!(s.legal_moves().len(), 2);
        let mut pi = vec![0.0; 9];
        for m in s.legal_moves() {
            pi[m.0] = 0.5;
        }
        let params = EvaluatorParams::Tabular(TabularParams::new(GameSpec::tictactoe(), 1));
        let batch = vec![(
            s,
            TrainTarget {
                latent: 0,
                pi,
                z: 1.0,
                z_d: 0.0,
            },
        )];
        let parts = params.loss(&batch, &LossConfig::default()).unwrap();
        let expected = 1.0 + std::f64::consts::LN_2;
        assert!((parts.total() - expected).abs() < 1e-12);
        assert!((parts.value - 1.0).abs() < 1e-12);
        assert!((parts.policy - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(parts.intrinsic, 0.0);
    }

    #[test]
    fn zero_learning_rate_leaves_params_bitwise_unchanged() {
        let spec = GameSpec::tictactoe();
        let mut params = EvaluatorParams::Mlp(MlpParams::new(spec, 2, &[8, 8], 11));
        let before = params.clone();
        let batch = vec![ttt_batch_entry(1.0)];
        let mut opt = Optimizer::new(0.9);
        opt.step(&mut params, &batch, 0.0, &LossConfig::default())
            .unwrap();
        assert_eq!(params, before);

        let mut tab = EvaluatorParams::Tabular(TabularParams::new(spec, 2));
        let before = tab.clone();
        opt.step(&mut tab, &batch, 0.0, &LossConfig::default())
            .unwrap();
        assert_eq!(tab, before);
    }

    #[test]
    fn repeated_updates_drive_loss_down() {
        // One-hot policy target and exactly reachable value targets, so the
        // loss floor is zero and convergence below 1e-3 is attainable.
        let spec = GameSpec::tictactoe();
        let mut params = EvaluatorParams::Mlp(MlpParams::new(spec, 1, &[16, 16], 3));
        let s = GameState::initial(spec);
        let mut pi = vec![0.0; 9];
        pi[4] = 1.0;
        let batch = vec![(
            s,
            TrainTarget {
                latent: 0,
                pi,
                z: 0.5,
                z_d: 0.25,
            },
        )];
        let cfg = LossConfig {
            intrinsic_weight: 1.0,
            l2: 0.0,
        };
        let mut opt = Optimizer::new(0.9);
        let mut last = f64::INFINITY;
        let mut final_parts = LossParts::default();
        for step in 0..5000 {
            let parts = opt.step(&mut params, &batch, 1e-2, &cfg).unwrap();
            if step % 500 == 0 {
                assert!(parts.total() < last, "loss rose at step {step}");
                last = parts.total();
            }
            final_parts = parts;
        }
        assert!(
            final_parts.total() < 1e-3,
            "converged loss {}",
            final_parts.total()
        );
    }

    #[test]
    fn targets_with_illegal_support_are_rejected() {
        let s = GameState::initial(GameSpec::connect_four());
        let s = s.apply_move(MoveId(0)).unwrap();
        let mut bad_pi = vec![0.0; 5];
        bad_pi[0] = 1.0; // legal actually; make one illegal by filling col 0
        let mut full = s.clone();
        for mv in [0, 0, 0] {
            full = full.apply_move(MoveId(mv)).unwrap();
        }
        assert!(!full.is_legal(MoveId(0)));
        let params = EvaluatorParams::Tabular(TabularParams::new(GameSpec::connect_four(), 1));
        let batch = vec![(
            full,
            TrainTarget {
                latent: 0,
                pi: bad_pi,
                z: 0.0,
                z_d: 0.0,
            },
        )];
        let err = params.loss(&batch, &LossConfig::default()).unwrap_err();
        assert!(matches!(err, EvalError::BadTarget(_)));
    }

    #[test]
    fn masked_softmax_is_a_distribution_on_legal_moves() {
        let logits = vec![3.0, -1.0, 0.5, 2.0, 0.0];
        let legal = vec![1, 3];
        let p = masked_softmax(&logits, &legal);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[2], 0.0);
        assert_eq!(p[4], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[3] > p[1]);
    }
}

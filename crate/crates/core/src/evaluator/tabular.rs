//! Tabular evaluator: one independent entry per (position, latent).
//!
//! Entries hold raw policy logits plus the two value scalars and receive the
//! same loss gradient the MLP would. Unseen keys evaluate to the uniform
//! policy with zero values, which keeps early search well-posed. Keys ignore
//! history planes: table lookups are by board + side to move.

use std::collections::{BTreeMap, HashMap};

use crate::game::{position_to_line, GameSpec, GameState};

use super::{
    check_target, masked_softmax, sample_loss, Batch, EvalError, EvalOutput, LossConfig,
    LossParts,
};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TabEntry {
    pub logits: Vec<f64>,
    pub v: f64,
    pub v_d: f64,
}

/// Table key: board/mover key plus the conditioning latent.
pub(crate) type TabKey = (u64, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct TabularParams {
    spec: GameSpec,
    n_players: usize,
    // BTreeMap so serialization and iteration order are deterministic.
    pub(crate) table: BTreeMap<TabKey, TabEntry>,
}

impl TabularParams {
    pub fn new(spec: GameSpec, n_players: usize) -> TabularParams {
        TabularParams {
            spec,
            n_players,
            table: BTreeMap::new(),
        }
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn game_name(&self) -> &str {
        self.spec.name()
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Pin an entry directly (tests and fixtures).
    pub fn set_entry(
        &mut self,
        state: &GameState,
        latent: usize,
        logits: Vec<f64>,
        v: f64,
        v_d: f64,
    ) {
        assert_eq!(logits.len(), self.spec.move_space());
        self.table
            .insert((state.state_key(), latent), TabEntry { logits, v, v_d });
    }

    fn check_state(&self, state: &GameState, latent: usize) -> Result<(), EvalError> {
        if state.spec().kind != self.spec.kind {
            return Err(EvalError::GameMismatch {
                expected: self.spec.name().to_string(),
                found: state.spec().name().to_string(),
            });
        }
        if latent >= self.n_players {
            return Err(EvalError::LatentOutOfRange {
                latent,
                n_players: self.n_players,
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError> {
        self.check_state(state, latent)?;
        let legal: Vec<usize> = state.legal_moves().iter().map(|m| m.0).collect();
        if legal.is_empty() {
            return Err(EvalError::TerminalState(position_to_line(state)));
        }
        let key = (state.state_key(), latent);
        match self.table.get(&key) {
            Some(entry) => Ok(EvalOutput {
                p: masked_softmax(&entry.logits, &legal),
                v: entry.v,
                v_d: entry.v_d,
            }),
            None => {
                let mut p = vec![0.0; self.spec.move_space()];
                let w = 1.0 / legal.len() as f64;
                for &a in &legal {
                    p[a] = w;
                }
                Ok(EvalOutput { p, v: 0.0, v_d: 0.0 })
            }
        }
    }

    pub fn loss(&self, batch: &Batch, cfg: &LossConfig) -> Result<LossParts, EvalError> {
        if batch.is_empty() {
            return Err(EvalError::BadTarget("empty batch".to_string()));
        }
        let mut parts = LossParts::default();
        for (state, target) in batch {
            self.check_state(state, target.latent)?;
            check_target(state, target, self.n_players)?;
            let out = self.evaluate(state, target.latent)?;
            let (value, intrinsic, policy) = sample_loss(&out.p, out.v, out.v_d, target, cfg);
            parts.value += value;
            parts.intrinsic += intrinsic;
            parts.policy += policy;
        }
        let n = batch.len() as f64;
        parts.value /= n;
        parts.intrinsic /= n;
        parts.policy /= n;
        Ok(parts)
    }

    /// Plain SGD step on every entry the batch touches; gradients from
    /// different batch rows hitting the same entry accumulate before the
    /// step, so the update matches one gradient of the mean batch loss.
    pub fn sgd_step(
        &mut self,
        batch: &Batch,
        lr: f64,
        cfg: &LossConfig,
    ) -> Result<LossParts, EvalError> {
        if batch.is_empty() {
            return Err(EvalError::BadTarget("empty batch".to_string()));
        }
        let mut parts = LossParts::default();
        let mut grads: HashMap<TabKey, TabEntry> = HashMap::new();
        for (state, target) in batch {
            self.check_state(state, target.latent)?;
            let legal = check_target(state, target, self.n_players)?;
            let out = self.evaluate(state, target.latent)?;
            let (value, intrinsic, policy) = sample_loss(&out.p, out.v, out.v_d, target, cfg);
            parts.value += value;
            parts.intrinsic += intrinsic;
            parts.policy += policy;
            let key = (state.state_key(), target.latent);
            let g = grads.entry(key).or_insert_with(|| TabEntry {
                logits: vec![0.0; self.spec.move_space()],
                v: 0.0,
                v_d: 0.0,
            });
            // d(-sum pi ln p)/d logit_a = p_a - pi_a on legal moves.
            for &a in &legal {
                g.logits[a] += out.p[a] - target.pi[a];
            }
            g.v += -2.0 * (target.z - out.v);
            g.v_d += cfg.intrinsic_weight * -2.0 * (target.z_d - out.v_d);
        }
        let n = batch.len() as f64;
        parts.value /= n;
        parts.intrinsic /= n;
        parts.policy /= n;
        for (key, g) in &grads {
            for x in g.logits.iter().chain([&g.v, &g.v_d]) {
                if !x.is_finite() {
                    return Err(EvalError::NonFiniteGradient(format!(
                        "table entry {key:?}"
                    )));
                }
            }
        }
        if lr != 0.0 {
            for (key, g) in grads {
                let entry = self.table.entry(key).or_insert_with(|| TabEntry {
                    logits: vec![0.0; self.spec.move_space()],
                    v: 0.0,
                    v_d: 0.0,
                });
                for (w, gw) in entry.logits.iter_mut().zip(&g.logits) {
                    *w -= lr * gw / n;
                }
                entry.v -= lr * g.v / n;
                entry.v_d -= lr * g.v_d / n;
            }
        }
        Ok(parts)
    }
}

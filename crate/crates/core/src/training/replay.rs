//! Replay storage and the target bookkeeping done at store time.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diversity::{intrinsic_value_target, Trajectory};
use crate::evaluator::{Evaluate, TrainTarget};
use crate::game::{GameState, PlaneStack};

use super::TrainError;

/// Bounded FIFO of training examples. When full, the oldest example is
/// evicted first — recency is the only retention policy.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: VecDeque<(GameState, TrainTarget)>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 20)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, state: GameState, target: TrainTarget) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back((state, target));
    }

    /// The stored examples, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &(GameState, TrainTarget)> {
        self.items.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample_batch(
        &self,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<(GameState, TrainTarget)> {
        (0..batch_size)
            .map(|_| self.items[rng.gen_range(0..self.items.len())].clone())
            .collect()
    }
}

/// Attach targets to a finished trajectory's own-turn transitions and store
/// each one independently with probability `keep_probability`.
///
/// Targets fixed here: `π` is the stored search policy, `z` the final
/// outcome from the transition's mover perspective, and `z_d` the truncated
/// intrinsic return bootstrapped by `bootstrap` (pass `None` when diversity
/// is inactive — `z_d` is then identically zero, with no bootstrap query).
/// Returns how many transitions were stored.
pub fn store_transitions(
    buffer: &mut ReplayBuffer,
    trajectory: &Trajectory,
    keep_probability: f64,
    n_td: usize,
    bootstrap: Option<&dyn Evaluate>,
    rng: &mut ChaCha8Rng,
) -> Result<usize, TrainError> {
    if !(0.0..=1.0).contains(&keep_probability) {
        return Err(TrainError::InvalidConfig {
            field: "keep_probability",
            reason: format!("{keep_probability} is not a probability"),
        });
    }
    let mut stored = 0usize;
    for t in trajectory.own_steps() {
        // One rng draw per own transition, kept or not, so the stream is
        // insensitive to what earlier draws decided.
        let keep = rng.gen::<f64>() < keep_probability;
        if !keep {
            continue;
        }
        let step = &trajectory.steps[t];
        let z = f64::from(trajectory.outcome.signed_for(step.state.to_move()));
        let z_d = match bootstrap {
            None => 0.0,
            Some(eval) => {
                let boot_idx = t + n_td;
                let boot_value = match trajectory.steps.get(boot_idx) {
                    Some(boot_step) => {
                        eval.evaluate(&boot_step.state, trajectory.owner)?.v_d
                    }
                    None => 0.0,
                };
                intrinsic_value_target(trajectory, t, n_td, |_| boot_value)?
            }
        };
        buffer.push(
            step.state.clone(),
            TrainTarget {
                latent: step.latent,
                pi: step.pi.clone(),
                z,
                z_d,
            },
        );
        stored += 1;
    }
    Ok(stored)
}

/// Zero each history plane independently with the given probability; the
/// current board, side-to-move, and latent planes are never touched. A
/// stack without history planes passes through unchanged (but the rng is
/// still not consumed for non-history planes, keeping draws countable).
pub fn apply_history_dropout(
    planes: &PlaneStack,
    probability: f64,
    rng: &mut ChaCha8Rng,
) -> PlaneStack {
    let (lo, hi) = planes.history_planes;
    let mut out = planes.clone();
    for idx in lo..hi {
        if rng.gen::<f64>() < probability {
            out.planes[idx].fill(0.0);
        }
    }
    out
}

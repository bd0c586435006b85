//! Where self-play games begin.
//!
//! Games normally start from the initial board, but a sampler can mix in
//! positions from a supplied pool (typically puzzle starts) with
//! probability `1 − p_std`. Pool entries may carry a continuation line;
//! when intermediate sampling is on, every non-terminal prefix of that
//! line joins the pool too, letting games begin partway through a puzzle.
//!
//! Train/test splits are decided once, at sampler construction, from a
//! dedicated seed: a random split holds out individual entries, a family
//! split holds out whole opening families so no position related to a
//! held-out family is ever trained on.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::game::{GameSpec, GameState};
use crate::rng::{rng_for, Stream};

use super::TrainError;

/// One pool position: a start state, the opening family it belongs to,
/// and an optional continuation line (successor states, outermost first)
/// used for intermediate-position expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct StartEntry {
    pub state: GameState,
    pub family: String,
    /// States along the entry's solution line, in play order. Terminal
    /// states are allowed here; the sampler skips them.
    pub line: Vec<GameState>,
}

impl StartEntry {
    pub fn bare(state: GameState) -> StartEntry {
        StartEntry {
            state,
            family: String::new(),
            line: Vec::new(),
        }
    }
}

/// How the pool is split into a trainable part and a held-out part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitMode {
    /// Train on everything.
    #[default]
    None,
    /// Hold out a random fraction of individual entries.
    Random,
    /// Hold out whole opening families.
    HeldOutFamily,
}

impl SplitMode {
    pub fn name(&self) -> &'static str {
        match self {
            SplitMode::None => "none",
            SplitMode::Random => "random-split",
            SplitMode::HeldOutFamily => "held-out-family",
        }
    }

    pub fn parse(s: &str) -> Option<SplitMode> {
        [SplitMode::None, SplitMode::Random, SplitMode::HeldOutFamily]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Knobs of the start-position sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct StartSamplerConfig {
    /// Probability of starting from the standard initial position.
    pub p_std: f64,
    /// Expand pool entries with the non-terminal prefixes of their lines.
    pub include_intermediates: bool,
    pub split: SplitMode,
    /// Fraction of entries (or families) held out when a split is active.
    pub holdout_fraction: f64,
}

impl Default for StartSamplerConfig {
    fn default() -> Self {
        StartSamplerConfig {
            p_std: 0.5,
            include_intermediates: false,
            split: SplitMode::None,
            holdout_fraction: 0.5,
        }
    }
}

impl StartSamplerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        for (name, p) in [
            ("p_std", self.p_std),
            ("holdout_fraction", self.holdout_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(TrainError::InvalidConfig {
                    field: name,
                    reason: format!("{p} is not a probability"),
                });
            }
        }
        Ok(())
    }
}

/// A frozen sampling distribution: the split is fixed at construction,
/// after which draws only consume the caller's rng.
#[derive(Clone, Debug)]
pub struct StartSampler {
    spec: GameSpec,
    p_std: f64,
    eligible: Vec<GameState>,
    held_out: Vec<StartEntry>,
}

impl StartSampler {
    /// Build the sampler: apply the split (seeded from `seed` alone, so it
    /// is independent of draw order), then expand the trainable side with
    /// intermediate positions if requested.
    pub fn new(
        config: &StartSamplerConfig,
        pool: &[StartEntry],
        spec: GameSpec,
        seed: u64,
    ) -> Result<StartSampler, TrainError> {
        config.validate()?;
        let mut split_rng = rng_for(seed, Stream::Split, 0);
        let (train, held_out) = split_pool(config, pool, &mut split_rng);
        let mut eligible = Vec::new();
        for entry in &train {
            if !entry.state.is_terminal() {
                eligible.push(entry.state.clone());
            }
            if config.include_intermediates {
                for s in &entry.line {
                    if !s.is_terminal() {
                        eligible.push(s.clone());
                    }
                }
            }
        }
        if config.p_std < 1.0 && eligible.is_empty() {
            return Err(TrainError::EmptyStartPool);
        }
        Ok(StartSampler {
            spec,
            p_std: config.p_std,
            eligible,
            held_out,
        })
    }

    /// A sampler that always starts from the initial position.
    pub fn standard(spec: GameSpec) -> StartSampler {
        StartSampler {
            spec,
            p_std: 1.0,
            eligible: Vec::new(),
            held_out: Vec::new(),
        }
    }

    /// Draw one start: the initial position with probability `p_std`,
    /// otherwise uniform over the eligible pool.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> GameState {
        if self.p_std >= 1.0 || rng.gen::<f64>() < self.p_std {
            GameState::initial(self.spec)
        } else {
            self.eligible[rng.gen_range(0..self.eligible.len())].clone()
        }
    }

    /// Positions a game may start from (besides the initial position).
    pub fn eligible(&self) -> &[GameState] {
        &self.eligible
    }

    /// The test side of the split; empty without a split.
    pub fn held_out(&self) -> &[StartEntry] {
        &self.held_out
    }
}

/// Draw one start position (spec-level convenience over the sampler).
pub fn start_position(sampler: &StartSampler, rng: &mut ChaCha8Rng) -> GameState {
    sampler.sample(rng)
}

fn split_pool(
    config: &StartSamplerConfig,
    pool: &[StartEntry],
    rng: &mut ChaCha8Rng,
) -> (Vec<StartEntry>, Vec<StartEntry>) {
    match config.split {
        SplitMode::None => (pool.to_vec(), Vec::new()),
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(rng);
            let n_out = target_holdout(pool.len(), config.holdout_fraction);
            let held: Vec<usize> = order.into_iter().take(n_out).collect();
            partition(pool, |idx, _| held.contains(&idx))
        }
        SplitMode::HeldOutFamily => {
            let mut families: Vec<&str> = pool.iter().map(|e| e.family.as_str()).collect();
            families.sort_unstable();
            families.dedup();
            let mut families: Vec<String> = families.into_iter().map(String::from).collect();
            families.shuffle(rng);
            let n_out = target_holdout(families.len(), config.holdout_fraction);
            let held: Vec<String> = families.into_iter().take(n_out).collect();
            partition(pool, |_, e| held.contains(&e.family))
        }
    }
}

/// How many of `n` units to hold out for a fraction `f`: rounded, but
/// never the whole pool (training must keep something to sample).
fn target_holdout(n: usize, fraction: f64) -> usize {
    let raw = (n as f64 * fraction).round() as usize;
    raw.min(n.saturating_sub(1))
}

fn partition(
    pool: &[StartEntry],
    mut held: impl FnMut(usize, &StartEntry) -> bool,
) -> (Vec<StartEntry>, Vec<StartEntry>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, entry) in pool.iter().enumerate() {
        if held(idx, entry) {
            test.push(entry.clone());
        } else {
            train.push(entry.clone());
        }
    }
    (train, test)
}

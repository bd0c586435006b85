//! Shared fixtures for the criterion benchmarks: deterministic inputs so
//! timings compare across runs.

use rand_chacha::ChaCha8Rng;

use polyzero::rng::{rng_for, Stream};
use polyzero::{GameSpec, GameState, TabularParams};

pub fn tictactoe_root() -> GameState {
    GameState::initial(GameSpec::tictactoe())
}

pub fn connect4_root() -> GameState {
    GameState::initial(GameSpec::connect_four())
}

pub fn uniform_params(spec: GameSpec) -> TabularParams {
    TabularParams::new(spec, 1)
}

pub fn bench_rng(index: u64) -> ChaCha8Rng {
    rng_for(0, Stream::Evaluation, index)
}

/// A reproducible dense zero-sum payoff matrix in [-1, 1].
pub fn random_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = rng_for(seed, Stream::Evaluation, 0);
    (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

//! The actor–learner self-play loop.
//!
//! One training step is one self-play game plus (once the replay buffer can
//! fill a batch) one gradient update. Games are generated in rounds of
//! `workers` against frozen parameter snapshots; the learner then consumes
//! the round in game order and owns every mutation — parameters, ψ
//! occupancies, payoff table, replay buffer — so results are reproducible
//! from `(config, seed)` alone regardless of thread scheduling. Randomness
//! is split hierarchically: each game, store pass, and batch draw gets its
//! own stream indexed by game or step number.
//!
//! ψ snapshots propagate to actors per checkpoint (not per round): the
//! in-search intrinsic rewards of a whole checkpoint interval are measured
//! against one frozen team state.

pub mod persist;
mod replay;
mod start;

pub use persist::{
    graphs_to_csv, load_run_checkpoint, payoffs_to_csv, save_run_checkpoint, team_from_text,
    team_to_text, RunCheckpoint,
};
pub use replay::{apply_history_dropout, store_transitions, ReplayBuffer};
pub use start::{start_position, SplitMode, StartEntry, StartSampler, StartSamplerConfig};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::diversity::{DiversityError, TeamState, Trajectory, TrajectoryStep};
use crate::evaluator::{
    CheckpointError, EvalError, Evaluate, EvaluatorParams, LossConfig, LossParts, MlpParams,
    Optimizer, TabularParams,
};
use crate::game::{encode_planes, feature_map, GameError, GameSpec, GameState, Player};
use crate::league::{
    build_graphs, filter_experience, sample_matchup, LeagueError, LeagueGraphs, MatchmakerKind,
    Matchup, PayoffTable,
};
use crate::rng::{rng_for, subseed, Stream};
use crate::search::{
    run_search, select_action, select_action_with_temperature, SearchConfig, SearchError,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config field {field}: {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: String,
    },
    #[error("start-position pool is empty but p_std < 1")]
    EmptyStartPool,
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    League(#[from] LeagueError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Optional exploration variant: sample from a softmax over root visit
/// counts (temperature `tau`) for the first `first_steps` moves of each
/// game, instead of the standard visit-proportional rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationConfig {
    pub enabled: bool,
    pub tau: f64,
    pub first_steps: usize,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            enabled: false,
            tau: 10.0,
            first_steps: 15,
        }
    }
}

/// Which evaluator backend a run trains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalArch {
    Tabular,
    Mlp { hidden: Vec<usize> },
}

impl EvalArch {
    pub fn name(&self) -> String {
        match self {
            EvalArch::Tabular => "tabular".to_string(),
            EvalArch::Mlp { hidden } => {
                let dims: Vec<String> = hidden.iter().map(|d| d.to_string()).collect();
                format!("mlp:{}", dims.join(","))
            }
        }
    }

    pub fn parse(s: &str) -> Option<EvalArch> {
        if s == "tabular" {
            return Some(EvalArch::Tabular);
        }
        let dims = s.strip_prefix("mlp:")?;
        if dims.is_empty() {
            return Some(EvalArch::Mlp { hidden: vec![] });
        }
        let hidden: Option<Vec<usize>> = dims.split(',').map(|d| d.trim().parse().ok()).collect();
        Some(EvalArch::Mlp { hidden: hidden? })
    }
}

/// Everything a training run depends on. The same struct round-trips
/// through the key-value config text, so a config file fully determines a
/// run (together with the start pool the file may point at).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub game: GameSpec,
    pub n_players: usize,
    pub total_steps: u64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Probability of storing each generated transition.
    pub keep_probability: f64,
    /// Simulations per training move.
    pub n_simulations: usize,
    /// Move number from which action selection turns greedy; `None` uses
    /// the game's own default.
    pub temperature_cutoff: Option<usize>,
    /// Reward mixing weight for players 1..; player 0 is always 1.
    pub lambda: f64,
    /// Equilibrium distance; `None` uses the team default `0.3·√D`.
    pub ell0: Option<f64>,
    /// TD window of the intrinsic value target (even).
    pub n_td: usize,
    pub matchmaker: MatchmakerKind,
    pub start: StartSamplerConfig,
    /// Pool file the CLI loads; the in-process API takes the pool directly.
    pub start_pool_file: Option<String>,
    pub history_dropout: f64,
    pub exploration: ExplorationConfig,
    pub seed: u64,
    pub arch: EvalArch,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Weight of the intrinsic value loss term.
    pub intrinsic_weight: f64,
    pub l2: f64,
    /// ψ EMA decay.
    pub beta: f64,
    pub checkpoint_interval: u64,
    /// Rebuild interaction graphs every this many games.
    pub graph_refresh: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: a team of five on tic-tac-toe, 100 simulations
    /// per move, batch 256, 50k steps.
    fn default() -> Self {
        TrainConfig {
            game: GameSpec::tictactoe(),
            n_players: 5,
            total_steps: 50_000,
            batch_size: 256,
            replay_capacity: 100_000,
            keep_probability: 1.0,
            n_simulations: 100,
            temperature_cutoff: None,
            lambda: 0.7,
            ell0: None,
            n_td: 4,
            matchmaker: MatchmakerKind::default(),
            start: StartSamplerConfig {
                p_std: 1.0,
                ..StartSamplerConfig::default()
            },
            start_pool_file: None,
            history_dropout: 0.2,
            exploration: ExplorationConfig::default(),
            seed: 0,
            arch: EvalArch::Mlp {
                hidden: vec![64, 64],
            },
            learning_rate: 0.01,
            momentum: 0.9,
            intrinsic_weight: 1.0,
            l2: 1e-4,
            beta: 0.99,
            checkpoint_interval: 1000,
            graph_refresh: 256,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &'static str, reason: String| TrainError::InvalidConfig { field, reason };
        for (name, p) in [
            ("keep_probability", self.keep_probability),
            ("history_dropout", self.history_dropout),
            ("lambda", self.lambda),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(name, format!("{p} is not a probability")));
            }
        }
        self.start.validate()?;
        if self.n_players == 0 {
            return Err(bad("n_players", "team must have at least one player".into()));
        }
        if self.total_steps == 0 {
            return Err(bad("total_steps", "must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "must be positive".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(bad(
                "replay_capacity",
                format!(
                    "capacity {} is smaller than batch size {}",
                    self.replay_capacity, self.batch_size
                ),
            ));
        }
        if self.n_simulations == 0 {
            return Err(bad("n_simulations", "must be positive".into()));
        }
        if self.n_td == 0 || self.n_td % 2 != 0 {
            return Err(bad("n_td", format!("{} is not even and positive", self.n_td)));
        }
        if let Some(e) = self.ell0 {
            if !(e > 0.0 && e.is_finite()) {
                return Err(bad("ell0", format!("{e} is not positive")));
            }
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(bad("beta", format!("{} outside (0, 1]", self.beta)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(bad("learning_rate", format!("{}", self.learning_rate)));
        }
        if !(self.exploration.tau > 0.0) {
            return Err(bad("exploration_tau", format!("{}", self.exploration.tau)));
        }
        if self.checkpoint_interval == 0 {
            return Err(bad("checkpoint_interval", "must be positive".into()));
        }
        if self.graph_refresh == 0 {
            return Err(bad("graph_refresh", "must be positive".into()));
        }
        if self.workers == 0 {
            return Err(bad("workers", "must be positive".into()));
        }
        Ok(())
    }

    /// The move number from which self-play selection turns greedy.
    pub fn cutoff(&self) -> usize {
        self.temperature_cutoff
            .unwrap_or(self.game.temperature_cutoff)
    }

    /// Serialize as `key = value` lines, one per field.
    pub fn to_text(&self) -> String {
        let opt_usize = |v: Option<usize>| match v {
            Some(x) => x.to_string(),
            None => "default".to_string(),
        };
        let opt_f64 = |v: Option<f64>| match v {
            Some(x) => x.to_string(),
            None => "default".to_string(),
        };
        let lines = [
            ("game", self.game.name().to_string()),
            ("history", self.game.history_len.to_string()),
            ("n_players", self.n_players.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("replay_capacity", self.replay_capacity.to_string()),
            ("keep_probability", self.keep_probability.to_string()),
            ("n_simulations", self.n_simulations.to_string()),
            ("temperature_cutoff", opt_usize(self.temperature_cutoff)),
            ("lambda", self.lambda.to_string()),
            ("ell0", opt_f64(self.ell0)),
            ("n_td", self.n_td.to_string()),
            ("matchmaker", self.matchmaker.name().to_string()),
            ("p_std", self.start.p_std.to_string()),
            (
                "include_intermediates",
                self.start.include_intermediates.to_string(),
            ),
            ("split", self.start.split.name().to_string()),
            ("holdout_fraction", self.start.holdout_fraction.to_string()),
            (
                "start_pool_file",
                self.start_pool_file.clone().unwrap_or("none".to_string()),
            ),
            ("history_dropout", self.history_dropout.to_string()),
            ("exploration", self.exploration.enabled.to_string()),
            ("exploration_tau", self.exploration.tau.to_string()),
            ("exploration_steps", self.exploration.first_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("arch", self.arch.name()),
            ("learning_rate", self.learning_rate.to_string()),
            ("momentum", self.momentum.to_string()),
            ("intrinsic_weight", self.intrinsic_weight.to_string()),
            ("l2", self.l2.to_string()),
            ("beta", self.beta.to_string()),
            ("checkpoint_interval", self.checkpoint_interval.to_string()),
            ("graph_refresh", self.graph_refresh.to_string()),
            ("workers", self.workers.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Parse `key = value` text. Lines may be blank or `#` comments;
    /// unknown keys and unparseable values are errors. Unlisted keys keep
    /// their defaults.
    pub fn from_text(text: &str) -> Result<TrainConfig, TrainError> {
        let mut config = TrainConfig::default();
        let mut game_name = config.game.name().to_string();
        let mut history = config.game.history_len;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(TrainError::ConfigParse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_err = |what: &str| TrainError::ConfigParse {
                line: line_no,
                message: format!("bad {what} value '{value}'"),
            };
            match key {
                "game" => game_name = value.to_string(),
                "history" => history = value.parse().map_err(|_| parse_err("history"))?,
                "n_players" => {
                    config.n_players = value.parse().map_err(|_| parse_err("n_players"))?
                }
                "total_steps" => {
                    config.total_steps = value.parse().map_err(|_| parse_err("total_steps"))?
                }
                "batch_size" => {
                    config.batch_size = value.parse().map_err(|_| parse_err("batch_size"))?
                }
                "replay_capacity" => {
                    config.replay_capacity =
                        value.parse().map_err(|_| parse_err("replay_capacity"))?
                }
                "keep_probability" => {
                    config.keep_probability =
                        value.parse().map_err(|_| parse_err("keep_probability"))?
                }
                "n_simulations" => {
                    config.n_simulations = value.parse().map_err(|_| parse_err("n_simulations"))?
                }
                "temperature_cutoff" => {
                    config.temperature_cutoff = if value == "default" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| parse_err("temperature_cutoff"))?)
                    }
                }
                "lambda" => config.lambda = value.parse().map_err(|_| parse_err("lambda"))?,
                "ell0" => {
                    config.ell0 = if value == "default" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| parse_err("ell0"))?)
                    }
                }
                "n_td" => config.n_td = value.parse().map_err(|_| parse_err("n_td"))?,
                "matchmaker" => {
                    config.matchmaker =
                        MatchmakerKind::parse(value).ok_or_else(|| parse_err("matchmaker"))?
                }
                "p_std" => config.start.p_std = value.parse().map_err(|_| parse_err("p_std"))?,
                "include_intermediates" => {
                    config.start.include_intermediates =
                        value.parse().map_err(|_| parse_err("include_intermediates"))?
                }
                "split" => {
                    config.start.split =
                        SplitMode::parse(value).ok_or_else(|| parse_err("split"))?
                }
                "holdout_fraction" => {
                    config.start.holdout_fraction =
                        value.parse().map_err(|_| parse_err("holdout_fraction"))?
                }
                "start_pool_file" => {
                    config.start_pool_file = if value == "none" {
                        None
                    } else {
                        Some(value.to_string())
                    }
                }
                "history_dropout" => {
                    config.history_dropout =
                        value.parse().map_err(|_| parse_err("history_dropout"))?
                }
                "exploration" => {
                    config.exploration.enabled =
                        value.parse().map_err(|_| parse_err("exploration"))?
                }
                "exploration_tau" => {
                    config.exploration.tau =
                        value.parse().map_err(|_| parse_err("exploration_tau"))?
                }
                "exploration_steps" => {
                    config.exploration.first_steps =
                        value.parse().map_err(|_| parse_err("exploration_steps"))?
                }
                "seed" => config.seed = value.parse().map_err(|_| parse_err("seed"))?,
                "arch" => {
                    config.arch = EvalArch::parse(value).ok_or_else(|| parse_err("arch"))?
                }
                "learning_rate" => {
                    config.learning_rate =
                        value.parse().map_err(|_| parse_err("learning_rate"))?
                }
                "momentum" => config.momentum = value.parse().map_err(|_| parse_err("momentum"))?,
                "intrinsic_weight" => {
                    config.intrinsic_weight =
                        value.parse().map_err(|_| parse_err("intrinsic_weight"))?
                }
                "l2" => config.l2 = value.parse().map_err(|_| parse_err("l2"))?,
                "beta" => config.beta = value.parse().map_err(|_| parse_err("beta"))?,
                "checkpoint_interval" => {
                    config.checkpoint_interval =
                        value.parse().map_err(|_| parse_err("checkpoint_interval"))?
                }
                "graph_refresh" => {
                    config.graph_refresh =
                        value.parse().map_err(|_| parse_err("graph_refresh"))?
                }
                "workers" => config.workers = value.parse().map_err(|_| parse_err("workers"))?,
                other => {
                    return Err(TrainError::ConfigParse {
                        line: line_no,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        config.game = GameSpec::from_name(&game_name)?.with_history(history);
        Ok(config)
    }

    /// Fresh parameters for this config's backend.
    pub fn init_params(&self) -> EvaluatorParams {
        match &self.arch {
            EvalArch::Tabular => {
                EvaluatorParams::Tabular(TabularParams::new(self.game, self.n_players))
            }
            EvalArch::Mlp { hidden } => EvaluatorParams::Mlp(MlpParams::new(
                self.game,
                self.n_players,
                hidden,
                subseed(self.seed, Stream::ParamInit, 0),
            )),
        }
    }

    /// Fresh team state with this config's λ, ℓ0, and β applied.
    pub fn init_team(&self) -> Result<TeamState, TrainError> {
        let mut team = TeamState::new(self.n_players, self.game.feature_dim());
        team.set_lambda(self.lambda)?;
        if let Some(e) = self.ell0 {
            team.set_ell0(e)?;
        }
        team.set_beta(self.beta)?;
        Ok(team)
    }

    fn loss_config(&self) -> LossConfig {
        LossConfig {
            intrinsic_weight: self.intrinsic_weight,
            l2: self.l2,
        }
    }

    fn search_config(&self) -> SearchConfig {
        SearchConfig {
            n_simulations: self.n_simulations,
            diversity_enabled: self.n_players >= 2,
            ..SearchConfig::default()
        }
    }
}

/// Play one game of the matchup from `start`, searching each position with
/// the acting player's latent. Returns the same game twice, tagged once per
/// seat: `(first mover's trajectory, second mover's trajectory)`.
///
/// Every step records the search policy, the acting latent, the transition
/// feature φ, and the intrinsic reward r_d measured against the frozen
/// `team` snapshot.
pub fn self_play_game(
    matchup: &Matchup,
    evaluator: &dyn Evaluate,
    team: &TeamState,
    config: &TrainConfig,
    start: GameState,
    rng: &mut ChaCha8Rng,
) -> Result<(Trajectory, Trajectory), TrainError> {
    let (latent_one, latent_two) = if matchup.exploiter_first {
        (matchup.exploiter, matchup.exploitee)
    } else {
        (matchup.exploitee, matchup.exploiter)
    };
    let base = config.search_config();
    let cutoff = config.cutoff();
    let mut state = start;
    let mut steps = Vec::new();
    let mut move_number = state.move_count() as usize;
    while !state.is_terminal() {
        let latent = match state.to_move() {
            Player::One => latent_one,
            Player::Two => latent_two,
        };
        let search_cfg = base.for_player(team, latent);
        let result = run_search(&state, latent, evaluator, Some(team), &search_cfg, rng)?;
        let mv = if config.exploration.enabled && move_number < config.exploration.first_steps {
            select_action_with_temperature(&result, config.exploration.tau, rng)
        } else {
            select_action(&result, move_number, cutoff, rng)
        };
        let phi = feature_map(&state, mv)?;
        let r_d = team.reward_for(latent, &phi)?;
        steps.push(TrajectoryStep {
            state: state.clone(),
            mv,
            latent,
            pi: result.pi.clone(),
            phi,
            r_d,
        });
        state = state.apply_move(mv)?;
        move_number += 1;
    }
    let outcome = state.outcome().expect("loop exits on terminal states");
    let tag = |owner: usize, owner_seat: Player| Trajectory {
        owner,
        owner_seat,
        steps: steps.clone(),
        outcome,
    };
    Ok((
        tag(latent_one, Player::One),
        tag(latent_two, Player::Two),
    ))
}

/// One line of the training-metrics series, recorded per update step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub loss_total: f64,
    pub loss_value: f64,
    pub loss_intrinsic: f64,
    pub loss_policy: f64,
    pub loss_l2: f64,
    /// Mean |r_d| over the just-played game's stored-side transitions.
    pub mean_abs_r_d: f64,
    /// Mean pairwise L2 distance between ψ vectors (0 for a team of one).
    pub mean_psi_distance: f64,
}

pub const METRICS_HEADER: &str =
    "step,loss_total,loss_value,loss_intrinsic,loss_policy,loss_l2,mean_abs_r_d,mean_psi_distance";

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.step,
            r.loss_total,
            r.loss_value,
            r.loss_intrinsic,
            r.loss_policy,
            r.loss_l2,
            r.mean_abs_r_d,
            r.mean_psi_distance
        ));
    }
    out
}

/// Read-only view of a checkpoint the loop is about to emit.
pub struct CheckpointView<'a> {
    pub step: u64,
    pub params: &'a EvaluatorParams,
    pub team: &'a TeamState,
    pub payoffs: &'a PayoffTable,
    pub graphs: &'a LeagueGraphs,
}

/// What a finished run hands back.
pub struct TrainReport {
    pub metrics: Vec<MetricsRow>,
    /// `(step, content hash)` of every emitted checkpoint.
    pub checkpoint_hashes: Vec<(u64, u64)>,
    pub params: EvaluatorParams,
    pub team: TeamState,
    pub payoffs: PayoffTable,
    pub graphs: LeagueGraphs,
    pub games_played: u64,
}

/// FNV-1a over bytes: a stable content hash for determinism checks.
pub fn content_hash(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn checkpoint_hash(view: &CheckpointView<'_>) -> u64 {
    let mut text = format!("step {}\n", view.step);
    text.push_str(&crate::evaluator::save_params(view.params));
    text.push_str(&team_to_text(view.team));
    text.push_str(&payoffs_to_csv(view.payoffs));
    content_hash(text.as_bytes())
}

fn mean_psi_distance(team: &TeamState) -> f64 {
    let n = team.n_players();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = team
                .psi(i)
                .iter()
                .zip(team.psi(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            total += d;
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Run the loop with no checkpoint sink.
pub fn train(config: &TrainConfig, pool: &[StartEntry]) -> Result<TrainReport, TrainError> {
    train_loop(config, pool, |_| Ok(()))
}

/// The actor–learner loop. `on_checkpoint` is called for every emitted
/// checkpoint (every `checkpoint_interval` steps and once at the end).
pub fn train_loop(
    config: &TrainConfig,
    pool: &[StartEntry],
    mut on_checkpoint: impl FnMut(CheckpointView<'_>) -> Result<(), TrainError>,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    let mut params = config.init_params();
    let mut team = config.init_team()?;
    // Actors measure r_d against this frozen copy; it refreshes per
    // checkpoint.
    let mut actor_team = team.clone();
    let sampler = StartSampler::new(&config.start, pool, config.game, config.seed)?;
    let mut payoffs = PayoffTable::new(config.n_players);
    let mut graphs = build_graphs(config.matchmaker, &payoffs)?;
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let mut optimizer = Optimizer::new(config.momentum);
    let loss_cfg = config.loss_config();
    let diversity_active = config.n_players >= 2;

    let mut metrics = Vec::new();
    let mut checkpoint_hashes = Vec::new();
    let mut games_played = 0u64;
    let mut step = 0u64;

    while step < config.total_steps {
        let round = (config.total_steps - step).min(config.workers.max(1) as u64) as usize;
        // Matchups and starts are decided up front, in game order, so the
        // parallel phase below cannot perturb them.
        let mut jobs = Vec::with_capacity(round);
        for k in 0..round {
            let game_idx = games_played + k as u64;
            let mut match_rng = rng_for(config.seed, Stream::Matchup, game_idx);
            let matchup = sample_matchup(&graphs, &mut match_rng)?;
            let mut start_rng = rng_for(config.seed, Stream::StartPosition, game_idx);
            let start = sampler.sample(&mut start_rng);
            jobs.push((game_idx, matchup, start));
        }

        // Actor phase: play the round against frozen snapshots. Output
        // order matches job order whatever the thread schedule does.
        let play = |(game_idx, matchup, start): &(u64, Matchup, GameState)| {
            let mut rng = rng_for(config.seed, Stream::SelfPlay, *game_idx);
            let (one, two) =
                self_play_game(matchup, &params, &actor_team, config, start.clone(), &mut rng)?;
            Ok((*matchup, one, two))
        };
        let results: Vec<Result<(Matchup, Trajectory, Trajectory), TrainError>> =
            if config.workers > 1 {
                jobs.par_iter().map(play).collect()
            } else {
                jobs.iter().map(play).collect()
            };

        // Learner phase: consume in game order; all mutation happens here.
        for result in results {
            let (matchup, one, two) = result?;
            let game_idx = games_played;
            games_played += 1;

            payoffs.record(&matchup, one.outcome)?;
            let kept = filter_experience(&matchup, vec![one, two]);
            let mut r_d_sum = 0.0;
            let mut r_d_count = 0usize;
            for traj in &kept {
                team.update_occupancy(traj, traj.owner)?;
                for t in traj.own_steps() {
                    r_d_sum += traj.steps[t].r_d.abs();
                    r_d_count += 1;
                }
            }
            let mean_abs_r_d = if r_d_count == 0 {
                0.0
            } else {
                r_d_sum / r_d_count as f64
            };

            let mut store_rng = rng_for(config.seed, Stream::ReplaySample, game_idx);
            let bootstrap: Option<&dyn Evaluate> =
                if diversity_active { Some(&params) } else { None };
            for traj in &kept {
                store_transitions(
                    &mut buffer,
                    traj,
                    config.keep_probability,
                    config.n_td,
                    bootstrap,
                    &mut store_rng,
                )?;
            }

            if (games_played) % config.graph_refresh == 0 {
                graphs = build_graphs(config.matchmaker, &payoffs)?;
            }

            step += 1;
            if buffer.len() >= config.batch_size {
                let mut batch_rng = rng_for(config.seed, Stream::BatchSample, step);
                let batch = buffer.sample_batch(config.batch_size, &mut batch_rng);
                let dropout = config.history_dropout > 0.0
                    && config.game.history_len > 0
                    && matches!(params, EvaluatorParams::Mlp(_));
                let parts: LossParts = if dropout {
                    let mut inputs = Vec::with_capacity(batch.len());
                    for (state, target) in &batch {
                        let planes = encode_planes(state, target.latent, config.n_players)?;
                        let dropped =
                            apply_history_dropout(&planes, config.history_dropout, &mut batch_rng);
                        inputs.push(dropped.flatten());
                    }
                    optimizer.step_with_inputs(
                        &mut params,
                        &batch,
                        &inputs,
                        config.learning_rate,
                        &loss_cfg,
                    )?
                } else {
                    optimizer.step(&mut params, &batch, config.learning_rate, &loss_cfg)?
                };
                metrics.push(MetricsRow {
                    step,
                    loss_total: parts.total(),
                    loss_value: parts.value,
                    loss_intrinsic: parts.intrinsic,
                    loss_policy: parts.policy,
                    loss_l2: parts.l2,
                    mean_abs_r_d,
                    mean_psi_distance: mean_psi_distance(&team),
                });
            }

            if step % config.checkpoint_interval == 0 || step == config.total_steps {
                let view = CheckpointView {
                    step,
                    params: &params,
                    team: &team,
                    payoffs: &payoffs,
                    graphs: &graphs,
                };
                checkpoint_hashes.push((step, checkpoint_hash(&view)));
                on_checkpoint(view)?;
                actor_team = team.clone();
            }
        }
    }

    Ok(TrainReport {
        metrics,
        checkpoint_hashes,
        params,
        team,
        payoffs,
        graphs,
        games_played,
    })
}

#[cfg(test)]
mod tests;

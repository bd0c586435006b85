//! Latent-conditioned self-play teams on exactly solvable games.
//!
//! A team of agents shares one set of parameters, distinguished only by a
//! latent index fed to the evaluator. Teams train by league self-play with
//! PUCT search; all but the first agent trade extrinsic reward against a
//! behavioral-diversity bonus, and at decision time the team is aggregated
//! by sub-additive selection rules over per-agent search statistics. The
//! bundled games (tic-tac-toe, 5x4 connect-four) are solved exactly by an
//! in-crate oracle, so every claim the training stack makes can be checked
//! against ground truth.

pub mod diversity;
pub mod evaluation;
pub mod evaluator;
pub mod game;
pub mod league;
pub mod rng;
pub mod search;
pub mod training;

pub use diversity::{
    combined_reward, intrinsic_reward, intrinsic_value_target, DiversityError, TeamState,
    Trajectory, TrajectoryStep,
};
pub use evaluation::{
    evaluate_team_on_puzzle, generate_puzzles, leave_one_out_selection, matches_to_csv,
    max_over_latents, occupancy_report, parse_puzzles, play_match, puzzles_to_text, score_puzzle,
    solve_puzzle, subadditive_select, verify_unique_solution, winrate_to_elo, EvaluationError,
    LooReport, LookupRule, MatchConfig, MatchSet, OccupancyConfig, OccupancyReport,
    PlayerSearchStats, Puzzle, PuzzleCriteria, PuzzleKind, PuzzleResponse, SelectionRule,
    TeamPuzzleResult,
};
pub use evaluator::{
    load_params, load_params_from, save_params, save_params_to, CheckpointError, EvalError,
    EvalOutput, Evaluate, EvaluatorParams, LossConfig, LossParts, MlpParams, Optimizer,
    TabularParams, TrainTarget,
};
pub use league::{
    build_graphs, filter_experience, nash_gap, sample_matchup, solve_nash, InteractionGraph,
    LeagueError, LeagueGraphs, MatchmakerKind, Matchup, NashError, NashSolution, PayoffCell,
    PayoffTable,
};
pub use training::{
    apply_history_dropout, metrics_to_csv, self_play_game, start_position, store_transitions,
    train, train_loop, CheckpointView, EvalArch, ExplorationConfig, MetricsRow, ReplayBuffer,
    SplitMode, StartEntry, StartSampler, StartSamplerConfig, TrainConfig, TrainError, TrainReport,
};
pub use search::{
    exploration_rate, greedy_action, puct_scores, puct_select, run_search, select_action,
    select_action_with_temperature, DirichletNoise, NodeStats, RootMoveStats, SearchConfig,
    SearchError, SearchResult,
};
pub use game::{
    encode_planes, feature_map, position_from_line, position_to_line, GameError, GameKind,
    GameSpec, GameState, MinimaxSolver, MoveId, Outcome, PlaneStack, Player, SolveResult,
};

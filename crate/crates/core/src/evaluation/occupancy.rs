//! Behavioral-occupancy profiles: what parts of the board each team
//! player actually visits when it plays on its own.
//!
//! Per player, the report averages the feature map over many greedy
//! self-play games — the same per-game mean that the training loop folds
//! into `ψ` — then tabulates the across-player spread (population standard
//! deviation per feature) and each player's offset from the team average.
//! Play is pure: greedy moves, no intrinsic bonus, both seats conditioned
//! on the same latent.

use rayon::prelude::*;

use super::EvaluationError;
use crate::diversity::TeamState;
use crate::evaluator::Evaluate;
use crate::game::{feature_map, GameSpec, GameState};
use crate::rng::{rng_for, Stream};
use crate::search::{greedy_action, run_search, SearchConfig};

#[derive(Clone, Copy, Debug)]
pub struct OccupancyConfig {
    /// Greedy self-play games per player.
    pub n_games: usize,
    pub n_simulations: usize,
    pub seed: u64,
}

impl Default for OccupancyConfig {
    fn default() -> OccupancyConfig {
        OccupancyConfig {
            n_games: 100,
            n_simulations: 32,
            seed: 0,
        }
    }
}

/// Per-player occupancy means plus the team-level spread tables.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyReport {
    /// `n_players × feature_dim`: mean over games of the per-game mean
    /// feature map.
    pub mean: Vec<Vec<f64>>,
    /// Per feature, the population standard deviation across players.
    pub std: Vec<f64>,
    /// `mean` with the across-player average subtracted per feature.
    pub centered: Vec<Vec<f64>>,
}

fn game_mean_phi(
    latent: usize,
    params: &dyn Evaluate,
    spec: GameSpec,
    search: &SearchConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>, EvaluationError> {
    let mut state = GameState::initial(spec);
    let mut sum = vec![0.0; spec.feature_dim()];
    let mut count = 0usize;
    while !state.is_terminal() {
        let result = run_search(&state, latent, params, None, search, rng)?;
        let mv = greedy_action(&result, rng);
        let phi = feature_map(&state, mv)?;
        for (s, x) in sum.iter_mut().zip(&phi) {
            *s += x;
        }
        count += 1;
        state = state.apply_move(mv)?;
    }
    let inv = 1.0 / count as f64;
    for s in &mut sum {
        *s *= inv;
    }
    Ok(sum)
}

/// Profile every player of `team` by greedy self-play and tabulate the
/// across-player spread. Games run concurrently but each draws from its
/// own seed stream, so the report is a pure function of the inputs.
pub fn occupancy_report(
    team: &TeamState,
    params: &(dyn Evaluate + Sync),
    spec: GameSpec,
    config: &OccupancyConfig,
) -> Result<OccupancyReport, EvaluationError> {
    if team.feature_dim() != spec.feature_dim() {
        return Err(EvaluationError::InvalidCriteria {
            message: format!(
                "team tracks {} features but the game produces {}",
                team.feature_dim(),
                spec.feature_dim()
            ),
        });
    }
    if config.n_games == 0 {
        return Err(EvaluationError::InvalidCriteria {
            message: "occupancy needs at least one game per player".to_string(),
        });
    }
    let n_players = team.n_players();
    if n_players > params.n_players() {
        return Err(EvaluationError::InvalidCriteria {
            message: format!(
                "team has {} players but the evaluator conditions on only {}",
                n_players,
                params.n_players()
            ),
        });
    }
    let search = SearchConfig {
        n_simulations: config.n_simulations,
        ..SearchConfig::default()
    };
    let d = spec.feature_dim();
    let jobs: Vec<(usize, usize)> = (0..n_players)
        .flat_map(|i| (0..config.n_games).map(move |g| (i, g)))
        .collect();
    let game_means: Vec<Result<(usize, Vec<f64>), EvaluationError>> = jobs
        .par_iter()
        .map(|&(player, game)| {
            let idx = (player * config.n_games + game) as u64;
            let mut rng = rng_for(config.seed, Stream::Evaluation, idx);
            let phi = game_mean_phi(player, params, spec, &search, &mut rng)?;
            Ok((player, phi))
        })
        .collect();
    let mut mean = vec![vec![0.0; d]; n_players];
    for r in game_means {
        let (player, phi) = r?;
        for (m, x) in mean[player].iter_mut().zip(&phi) {
            *m += x / config.n_games as f64;
        }
    }
    let mut centered = mean.clone();
    let mut std = vec![0.0; d];
    for f in 0..d {
        let avg = mean.iter().map(|row| row[f]).sum::<f64>() / n_players as f64;
        let var = mean
            .iter()
            .map(|row| (row[f] - avg).powi(2))
            .sum::<f64>()
            / n_players as f64;
        std[f] = var.sqrt();
        for row in &mut centered {
            row[f] -= avg;
        }
    }
    Ok(OccupancyReport {
        mean,
        std,
        centered,
    })
}

pub const OCCUPANCY_PLAYER_HEADER: &str = "player,feature,value";
pub const OCCUPANCY_STD_HEADER: &str = "feature,value";

fn player_table_csv(table: &[Vec<f64>]) -> String {
    let mut out = String::from(OCCUPANCY_PLAYER_HEADER);
    out.push('\n');
    for (player, row) in table.iter().enumerate() {
        for (feature, value) in row.iter().enumerate() {
            out.push_str(&format!("{player},{feature},{value}\n"));
        }
    }
    out
}

pub fn occupancy_mean_csv(report: &OccupancyReport) -> String {
    player_table_csv(&report.mean)
}

pub fn occupancy_centered_csv(report: &OccupancyReport) -> String {
    player_table_csv(&report.centered)
}

pub fn occupancy_std_csv(report: &OccupancyReport) -> String {
    let mut out = String::from(OCCUPANCY_STD_HEADER);
    out.push('\n');
    for (feature, value) in report.std.iter().enumerate() {
        out.push_str(&format!("{feature},{value}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::{Trajectory, TrajectoryStep};
    use crate::evaluator::{MlpParams, TabularParams};
    use crate::game::Player;

    #[test]
    fn a_team_of_one_has_no_spread() {
        let spec = GameSpec::tictactoe();
        let team = TeamState::new(1, spec.feature_dim());
        let params = TabularParams::new(spec, 1);
        let report = occupancy_report(
            &team,
            &params,
            spec,
            &OccupancyConfig {
                n_games: 6,
                n_simulations: 4,
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(report.mean.len(), 1);
        assert_eq!(report.mean[0].len(), spec.feature_dim());
        assert!(report.std.iter().all(|&s| s == 0.0));
        assert!(report.centered[0].iter().all(|&c| c == 0.0));
        // Means are genuine occupancy fractions.
        assert!(report.mean[0].iter().all(|&m| (0.0..=1.0).contains(&m)));
        assert!(report.mean[0].iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn centered_rows_cancel_per_feature() {
        let spec = GameSpec::tictactoe();
        let team = TeamState::new(3, spec.feature_dim());
        // A randomly initialized network gives each latent its own prior,
        // so the players genuinely spread out.
        let params = MlpParams::new(spec, 3, &[4], 7);
        let report = occupancy_report(
            &team,
            &params,
            spec,
            &OccupancyConfig {
                n_games: 4,
                n_simulations: 4,
                seed: 1,
            },
        )
        .unwrap();
        for f in 0..spec.feature_dim() {
            let total: f64 = report.centered.iter().map(|row| row[f]).sum();
            assert!(total.abs() < 1e-9, "feature {f} centered sum {total}");
        }
        // std is the population spread of the mean rows.
        for f in 0..spec.feature_dim() {
            let avg = report.mean.iter().map(|r| r[f]).sum::<f64>() / 3.0;
            let var =
                report.mean.iter().map(|r| (r[f] - avg).powi(2)).sum::<f64>() / 3.0;
            assert!((report.std[f] - var.sqrt()).abs() < 1e-12);
        }
    }

    /// The report's mean is the stationary target of the training-side
    /// occupancy EMA: feeding the same kind of greedy games through
    /// `update_occupancy` long enough lands `ψ` near the report's row.
    #[test]
    fn report_means_agree_with_the_occupancy_ema() {
        let spec = GameSpec::tictactoe();
        let params = TabularParams::new(spec, 1);
        let search = SearchConfig {
            n_simulations: 8,
            ..SearchConfig::default()
        };
        let n_games = 1200usize;
        let mut team = TeamState::new(1, spec.feature_dim());
        for g in 0..n_games {
            // A seed stream disjoint from the one the report uses.
            let mut rng = rng_for(77, Stream::Evaluation, g as u64);
            let mut state = GameState::initial(spec);
            let mut steps = Vec::new();
            let outcome = loop {
                if let Some(outcome) = state.outcome() {
                    break outcome;
                }
                let result = run_search(&state, 0, &params, None, &search, &mut rng).unwrap();
                let mv = greedy_action(&result, &mut rng);
                steps.push(TrajectoryStep {
                    state: state.clone(),
                    mv,
                    latent: 0,
                    pi: result.pi.clone(),
                    phi: feature_map(&state, mv).unwrap(),
                    r_d: 0.0,
                });
                state = state.apply_move(mv).unwrap();
            };
            let trajectory = Trajectory {
                owner: 0,
                owner_seat: Player::One,
                steps,
                outcome,
            };
            team.update_occupancy(&trajectory, 0).unwrap();
        }
        let report = occupancy_report(
            &team,
            &params,
            spec,
            &OccupancyConfig {
                n_games,
                n_simulations: 8,
                seed: 5,
            },
        )
        .unwrap();
        let psi = team.psi(0);
        let worst = report.mean[0]
            .iter()
            .zip(psi)
            .map(|(m, p)| (m - p).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.2, "EMA and report disagree by {worst}");
        // Sanity: both profiles are far from degenerate.
        assert!(psi.iter().sum::<f64>() > 1.0);
    }

    #[test]
    fn csv_tables_have_locked_schemas_and_row_counts() {
        let report = OccupancyReport {
            mean: vec![vec![0.25, 0.5], vec![0.75, 0.5]],
            std: vec![0.25, 0.0],
            centered: vec![vec![-0.25, 0.0], vec![0.25, 0.0]],
        };
        let mean_csv = occupancy_mean_csv(&report);
        let lines: Vec<&str> = mean_csv.lines().collect();
        assert_eq!(lines[0], "player,feature,value");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert_eq!(lines[1], "0,0,0.25");
        assert_eq!(lines[4], "1,1,0.5");
        let centered_csv = occupancy_centered_csv(&report);
        assert_eq!(centered_csv.lines().next().unwrap(), "player,feature,value");
        assert_eq!(centered_csv.lines().count(), 5);
        assert_eq!(centered_csv.lines().nth(1).unwrap(), "0,0,-0.25");
        let std_csv = occupancy_std_csv(&report);
        let std_lines: Vec<&str> = std_csv.lines().collect();
        assert_eq!(std_lines, vec!["feature,value", "0,0.25", "1,0"]);
    }

    #[test]
    fn reports_are_bitwise_deterministic() {
        let spec = GameSpec::tictactoe();
        let team = TeamState::new(2, spec.feature_dim());
        let params = MlpParams::new(spec, 2, &[4], 3);
        let config = OccupancyConfig {
            n_games: 3,
            n_simulations: 4,
            seed: 12,
        };
        let a = occupancy_report(&team, &params, spec, &config).unwrap();
        let b = occupancy_report(&team, &params, spec, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(occupancy_mean_csv(&a), occupancy_mean_csv(&b));
    }

    #[test]
    fn mismatched_feature_dimensions_are_rejected() {
        let spec = GameSpec::tictactoe();
        let team = TeamState::new(2, 3);
        let params = TabularParams::new(spec, 2);
        assert!(matches!(
            occupancy_report(&team, &params, spec, &OccupancyConfig::default()),
            Err(EvaluationError::InvalidCriteria { .. })
        ));
        let ok_team = TeamState::new(2, spec.feature_dim());
        assert!(matches!(
            occupancy_report(
                &ok_team,
                &params,
                spec,
                &OccupancyConfig {
                    n_games: 0,
                    ..OccupancyConfig::default()
                }
            ),
            Err(EvaluationError::InvalidCriteria { .. })
        ));
    }
}

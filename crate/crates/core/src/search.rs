//! PUCT tree search, with optional diversity-aware leaf values.
//!
//! The tree is the standard one: every simulation walks from the root by
//! maximizing `Q(s,a) + C(s)·P(s,a)·√N(s)/(1+N(s,a))`, expands one new node,
//! evaluates it, and backs the value up the path with the sign alternating
//! each ply. `N(s)` is the sum of the node's edge visits, and the root is
//! expanded before the first simulation, so after a search the root's edge
//! visits sum to exactly `n_simulations`.
//!
//! When diversity is active the leaf value changes in two ways before the
//! backup: the evaluator's extrinsic and intrinsic value heads are mixed as
//! `λ·v + (1−λ)·v_d`, and the intrinsic rewards of the edges walked on the
//! searching player's own turns are accumulated and added inside the same
//! `(1−λ)` weight — the backed-up scalar is `λ·v + (1−λ)·(v_d + Σ r_d)`.
//! Edges walked on the opponent's turns contribute nothing, terminal leaves
//! use the exact game outcome for `v` and zero for `v_d`, and one search
//! uses one latent and one frozen `ψ` snapshot throughout, so the searching
//! player models its opponent as itself. Per-edge rewards are cached on the
//! edge: `ψ` cannot change mid-search. The mixed scalar rides the ordinary
//! sign-alternating backup, exactly like a plain value.
//!
//! A team of one has no rival, so diversity degenerates gracefully: with
//! `λ = 1`, a single player, or the flag off, the search is bit-for-bit the
//! vanilla algorithm.

use crate::diversity::{intrinsic_reward, DiversityError, TeamState};
use crate::evaluator::Evaluate;
use crate::game::{feature_map, GameState, MoveId, Player};
use crate::EvalError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cannot search a terminal position")]
    TerminalRoot,
    #[error("a search needs at least one simulation")]
    ZeroSimulations,
    #[error("diversity search requested but no team state was supplied")]
    MissingTeam,
    #[error("tree audit failed: {reason}")]
    AuditFailed { reason: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
}

/// Per-edge search statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeStats {
    pub n: u64,
    pub w: f64,
    pub q: f64,
    pub prior: f64,
}

impl NodeStats {
    pub fn fresh(prior: f64) -> NodeStats {
        NodeStats {
            n: 0,
            w: 0.0,
            q: 0.0,
            prior,
        }
    }
}

/// Dirichlet noise mixed into the root priors:
/// `P' = (1−weight)·P + weight·Dir(α)`. Off by default everywhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletNoise {
    pub alpha: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub n_simulations: usize,
    pub c_base: f64,
    pub c_init: f64,
    /// Master switch for the intrinsic machinery. Even when set, diversity
    /// only engages for `lambda < 1` and a team of at least two.
    pub diversity_enabled: bool,
    /// Mixing weight of the player running this search.
    pub lambda: f64,
    /// Equilibrium distance used for in-search intrinsic rewards.
    pub ell0: f64,
    pub root_noise: Option<DirichletNoise>,
    /// Record one line per simulation in [`SearchResult::trace`].
    pub collect_trace: bool,
    /// Re-check tree invariants after every simulation (tests only; slow).
    pub audit: bool,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            n_simulations: 100,
            c_base: 19652.0,
            c_init: 1.25,
            diversity_enabled: false,
            lambda: 1.0,
            ell0: 1.0,
            root_noise: None,
            collect_trace: false,
            audit: false,
        }
    }
}

impl SearchConfig {
    /// The same search knobs, with `lambda` and `ell0` taken from `team`'s
    /// entry for `latent` — how the training loop derives each player's
    /// search from one shared base config.
    pub fn for_player(&self, team: &TeamState, latent: usize) -> SearchConfig {
        SearchConfig {
            lambda: team.lambda(latent),
            ell0: team.ell0(),
            ..self.clone()
        }
    }
}

/// `C(s) = ln((1 + N(s) + c_base)/c_base) + c_init`: the exploration weight
/// grows slowly with the parent's visit count.
pub fn exploration_rate(parent_visits: u64, config: &SearchConfig) -> f64 {
    ((1.0 + parent_visits as f64 + config.c_base) / config.c_base).ln() + config.c_init
}

/// PUCT scores `Q + c·P·√N(s)/(1+N(s,a))` for every child, with the
/// exploration rate `c` already evaluated.
pub fn puct_scores(stats: &[NodeStats], parent_visits: u64, c: f64) -> Vec<f64> {
    let sqrt_parent = (parent_visits as f64).sqrt();
    stats
        .iter()
        .map(|s| s.q + c * s.prior * sqrt_parent / (1.0 + s.n as f64))
        .collect()
}

/// Index of the child maximizing the PUCT score; exact ties are broken
/// uniformly at random (the rng is only consulted when there is a tie).
pub fn puct_select(
    stats: &[NodeStats],
    parent_visits: u64,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> usize {
    let c = exploration_rate(parent_visits, config);
    argmax_uniform_ties(&puct_scores(stats, parent_visits, c), rng)
}

/// Argmax with exact-equality ties resolved by one uniform draw. A single
/// maximum consumes no randomness.
fn argmax_uniform_ties(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!scores.is_empty());
    let best = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// Root statistics for one move after a finished search. `u` is the PUCT
/// exploration term at the final visit counts — the confidence width used
/// by the team-selection rules.
#[derive(Clone, Debug)]
pub struct RootMoveStats {
    pub mv: MoveId,
    pub n: u64,
    pub q: f64,
    pub u: f64,
    pub prior: f64,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    /// Visit-count distribution over the full move space (zero on illegal
    /// moves); sums to one.
    pub pi: Vec<f64>,
    /// Per-legal-move root statistics, in ascending move order.
    pub stats: Vec<RootMoveStats>,
    /// Visit-weighted mean of the root action values, from the root
    /// player's perspective.
    pub root_value: f64,
    /// One line per simulation when tracing was requested.
    pub trace: Option<Vec<String>>,
}

impl SearchResult {
    /// The most-visited root move, ties resolved toward the smallest move
    /// id (deterministic; used by final-evaluation drivers).
    pub fn best_move(&self) -> MoveId {
        self.stats
            .iter()
            .max_by(|a, b| a.n.cmp(&b.n).then(b.mv.0.cmp(&a.mv.0)))
            .expect("search results always cover at least one move")
            .mv
    }
}

struct Edge {
    mv: MoveId,
    stats: NodeStats,
    child: Option<usize>,
    /// Intrinsic reward of this edge, filled on first traversal and frozen
    /// for the rest of the search.
    r_d: Option<f64>,
}

struct Node {
    state: GameState,
    to_move: Player,
    edges: Vec<Edge>,
    /// Exact outcome from this node's mover perspective, for terminals.
    terminal_value: Option<f64>,
}

/// Frozen diversity context for one search.
struct DiversityContext {
    psi_own: Vec<f64>,
    psi_rival: Vec<f64>,
    ell0: f64,
    lambda: f64,
}

/// Run a full PUCT search from `state` for the player conditioned on
/// `latent`. `team` supplies the `ψ` snapshot for intrinsic rewards; pass
/// `None` for plain searches. The same latent conditions every evaluation
/// in the tree.
pub fn run_search(
    state: &GameState,
    latent: usize,
    evaluator: &dyn Evaluate,
    team: Option<&TeamState>,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SearchResult, SearchError> {
    if config.n_simulations == 0 {
        return Err(SearchError::ZeroSimulations);
    }
    if state.is_terminal() {
        return Err(SearchError::TerminalRoot);
    }

    let diversity = if config.diversity_enabled && config.lambda < 1.0 {
        let team = team.ok_or(SearchError::MissingTeam)?;
        if team.n_players() < 2 {
            None
        } else {
            let rival = team.nearest_rival(latent)?;
            Some(DiversityContext {
                psi_own: team.psi(latent).to_vec(),
                psi_rival: team.psi(rival).to_vec(),
                ell0: config.ell0,
                lambda: config.lambda,
            })
        }
    } else {
        None
    };

    let root_to_move = state.to_move();
    let root_eval = evaluator.evaluate(state, latent)?;
    let mut arena = vec![Node {
        state: state.clone(),
        to_move: root_to_move,
        edges: make_edges(state, &root_eval.p),
        terminal_value: None,
    }];
    if let Some(noise) = &config.root_noise {
        mix_root_noise(&mut arena[0].edges, noise, rng);
    }
    let mut trace = config.collect_trace.then(Vec::new);

    for sim in 0..config.n_simulations {
        let mut node_idx = 0usize;
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut reward_sum = 0.0;
        // Descend until something produces a leaf value: a terminal node or
        // a newly expanded one.
        let (raw_v, raw_v_d, leaf_to_move) = loop {
            if let Some(tv) = arena[node_idx].terminal_value {
                break (tv, 0.0, arena[node_idx].to_move);
            }
            let parent_visits = arena[node_idx].edges.iter().map(|e| e.stats.n).sum();
            let stats: Vec<NodeStats> = arena[node_idx].edges.iter().map(|e| e.stats).collect();
            let e_idx = puct_select(&stats, parent_visits, config, rng);
            path.push((node_idx, e_idx));

            if let Some(ctx) = &diversity {
                if arena[node_idx].to_move == root_to_move {
                    reward_sum += edge_reward(&mut arena, node_idx, e_idx, ctx)?;
                }
            }

            if let Some(child) = arena[node_idx].edges[e_idx].child {
                node_idx = child;
                continue;
            }

            // Expand: materialize the child, evaluate it, stop the descent.
            let mv = arena[node_idx].edges[e_idx].mv;
            let child_state = arena[node_idx]
                .state
                .apply_move(mv)
                .expect("edges only hold legal moves");
            let child_to_move = child_state.to_move();
            let (node, v, v_d) = if let Some(outcome) = child_state.outcome() {
                let tv = outcome.score_for(child_to_move);
                let node = Node {
                    state: child_state,
                    to_move: child_to_move,
                    edges: Vec::new(),
                    terminal_value: Some(tv),
                };
                (node, tv, 0.0)
            } else {
                let eval = evaluator.evaluate(&child_state, latent)?;
                let node = Node {
                    edges: make_edges(&child_state, &eval.p),
                    state: child_state,
                    to_move: child_to_move,
                    terminal_value: None,
                };
                (node, eval.v, eval.v_d)
            };
            let child_idx = arena.len();
            arena.push(node);
            arena[node_idx].edges[e_idx].child = Some(child_idx);
            break (v, v_d, child_to_move);
        };

        let mixed = match &diversity {
            Some(ctx) => ctx.lambda * raw_v + (1.0 - ctx.lambda) * (raw_v_d + reward_sum),
            None => raw_v,
        };

        backup(&mut arena, &path, leaf_to_move, mixed);

        if let Some(lines) = &mut trace {
            let moves: Vec<String> = path
                .iter()
                .map(|&(n, e)| arena[n].edges[e].mv.to_string())
                .collect();
            lines.push(format!(
                "sim={} path={} leaf={:.9} rsum={:.9}",
                sim,
                moves.join(","),
                mixed,
                reward_sum
            ));
        }
        if config.audit {
            audit_tree(&arena)?;
        }
    }

    finish(&arena, config, trace)
}

/// Credit `value` (expressed from `leaf_to_move`'s perspective) to every
/// edge on the path: `N += 1`, `W += ±value` with the sign positive where
/// the node's mover is the leaf's mover and negative on the other plies,
/// `Q = W/N`.
fn backup(arena: &mut [Node], path: &[(usize, usize)], leaf_to_move: Player, value: f64) {
    for &(n_idx, e_idx) in path {
        let sign = if arena[n_idx].to_move == leaf_to_move {
            1.0
        } else {
            -1.0
        };
        let s = &mut arena[n_idx].edges[e_idx].stats;
        s.n += 1;
        s.w += sign * value;
        s.q = s.w / s.n as f64;
    }
}

fn make_edges(state: &GameState, priors: &[f64]) -> Vec<Edge> {
    state
        .legal_moves()
        .into_iter()
        .map(|mv| Edge {
            mv,
            stats: NodeStats::fresh(priors[mv.0]),
            child: None,
            r_d: None,
        })
        .collect()
}

fn mix_root_noise(edges: &mut [Edge], noise: &DirichletNoise, rng: &mut ChaCha8Rng) {
    let gamma = Gamma::new(noise.alpha, 1.0).expect("alpha must be positive");
    let draws: Vec<f64> = edges.iter().map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total <= 0.0 {
        return;
    }
    for (edge, draw) in edges.iter_mut().zip(&draws) {
        edge.stats.prior =
            (1.0 - noise.weight) * edge.stats.prior + noise.weight * draw / total;
    }
}

/// Intrinsic reward of the traversed edge, computed once and cached (the
/// `ψ` snapshot is frozen for the whole search).
fn edge_reward(
    arena: &mut [Node],
    node_idx: usize,
    e_idx: usize,
    ctx: &DiversityContext,
) -> Result<f64, SearchError> {
    if let Some(r) = arena[node_idx].edges[e_idx].r_d {
        return Ok(r);
    }
    let mv = arena[node_idx].edges[e_idx].mv;
    let phi = feature_map(&arena[node_idx].state, mv)?;
    let r = intrinsic_reward(&phi, &ctx.psi_own, &ctx.psi_rival, ctx.ell0);
    arena[node_idx].edges[e_idx].r_d = Some(r);
    Ok(r)
}

fn finish(
    arena: &[Node],
    config: &SearchConfig,
    trace: Option<Vec<String>>,
) -> Result<SearchResult, SearchError> {
    let root = &arena[0];
    let total: u64 = root.edges.iter().map(|e| e.stats.n).sum();
    assert_eq!(
        total as usize, config.n_simulations,
        "root visit counts must sum to the simulation budget"
    );
    let move_space = root.state.spec().move_space();
    let mut pi = vec![0.0; move_space];
    let mut stats = Vec::with_capacity(root.edges.len());
    let c = exploration_rate(total, config);
    let sqrt_total = (total as f64).sqrt();
    let mut root_value = 0.0;
    for edge in &root.edges {
        pi[edge.mv.0] = edge.stats.n as f64 / total as f64;
        root_value += edge.stats.n as f64 / total as f64 * edge.stats.q;
        stats.push(RootMoveStats {
            mv: edge.mv,
            n: edge.stats.n,
            q: edge.stats.q,
            u: c * edge.stats.prior * sqrt_total / (1.0 + edge.stats.n as f64),
            prior: edge.stats.prior,
        });
    }
    Ok(SearchResult {
        pi,
        stats,
        root_value,
        trace,
    })
}

/// Walk every edge checking the bookkeeping invariants: `Q = W/N` (zero
/// when unvisited), and an expanded non-terminal child has been descended
/// exactly `N − 1` times (the first visit created it).
fn audit_tree(arena: &[Node]) -> Result<(), SearchError> {
    for (i, node) in arena.iter().enumerate() {
        for edge in &node.edges {
            let s = edge.stats;
            let expect = if s.n == 0 { 0.0 } else { s.w / s.n as f64 };
            if s.q != expect || (s.n == 0 && s.w != 0.0) {
                return Err(SearchError::AuditFailed {
                    reason: format!(
                        "node {i} move {}: N={} W={} Q={}",
                        edge.mv, s.n, s.w, s.q
                    ),
                });
            }
            if let Some(child) = edge.child {
                if arena[child].terminal_value.is_none() {
                    let child_total: u64 =
                        arena[child].edges.iter().map(|e| e.stats.n).sum();
                    if child_total + 1 != s.n {
                        return Err(SearchError::AuditFailed {
                            reason: format!(
                                "node {i} move {}: edge N={} but child descends {}",
                                edge.mv, s.n, child_total
                            ),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// In-game action choice: before the cutoff move, sample proportionally to
/// visit counts; from the cutoff on, take the most-visited move (ties
/// uniform at random). Final evaluations always use the greedy branch.
pub fn select_action(
    result: &SearchResult,
    move_number: usize,
    temperature_cutoff: usize,
    rng: &mut ChaCha8Rng,
) -> MoveId {
    if move_number < temperature_cutoff {
        sample_by_visits(result, rng)
    } else {
        greedy_action(result, rng)
    }
}

/// The most-visited root move, exact ties broken uniformly at random.
pub fn greedy_action(result: &SearchResult, rng: &mut ChaCha8Rng) -> MoveId {
    let best = result.stats.iter().map(|s| s.n).max().unwrap_or(0);
    let tied: Vec<MoveId> = result
        .stats
        .iter()
        .filter(|s| s.n == best)
        .map(|s| s.mv)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

fn sample_by_visits(result: &SearchResult, rng: &mut ChaCha8Rng) -> MoveId {
    let total: u64 = result.stats.iter().map(|s| s.n).sum();
    debug_assert!(total > 0);
    let mut ticket = rng.gen_range(0..total);
    for s in &result.stats {
        if ticket < s.n {
            return s.mv;
        }
        ticket -= s.n;
    }
    unreachable!("tickets are bounded by the total visit count")
}

/// Exploration variant: sample proportionally to `N^(1/τ)`. Large `τ`
/// flattens the distribution toward uniform over the visited moves.
pub fn select_action_with_temperature(
    result: &SearchResult,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> MoveId {
    let weights: Vec<f64> = result
        .stats
        .iter()
        .map(|s| (s.n as f64).powf(1.0 / tau))
        .collect();
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut ticket = rng.gen::<f64>() * total;
    for (s, w) in result.stats.iter().zip(&weights) {
        ticket -= w;
        if ticket <= 0.0 {
            return s.mv;
        }
    }
    result.stats.last().expect("non-empty move list").mv
}

//! Oracle-generated puzzles and their scoring semantics.
//!
//! Three kinds exist. `Unique` puzzles carry a solution tree: at the
//! solver's own turns a set of acceptable moves ("or" alternatives — any
//! one earns the step), at the opponent's turns a set of replies that must
//! all be handled ("and" branches); the puzzle scores 1 only if every
//! branch is answered correctly to its end. `MultiChoice` puzzles grade a
//! single move against a score table normalized by the best entry (1000).
//! `ValueThreshold` puzzles ask for the position's value and score 1 when
//! the post-search prediction lands within a fixed threshold of the truth.
//!
//! Generation enumerates reachable positions breadth-first and keeps, per
//! kind: positions whose optimal line is unique move-by-move until the end
//! (chained by oracle play), positions with both value-preserving and
//! value-losing moves (graded 1000/0 by construction), and drawn positions
//! that a threat-count heuristic misreads (the fortress pattern: the board
//! looks lost for the mover, the oracle says draw). Puzzle families are
//! named after the first two plies of the opening that first reaches the
//! position, which is what held-out-family splits key on.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EvaluationError, PlayerSearchStats, SelectionRule};
use crate::evaluator::Evaluate;
use crate::game::{
    position_from_line, position_to_line, GameSpec, GameState, MinimaxSolver, MoveId, Player,
};
use crate::rng::{rng_for, Stream};
use crate::search::{run_search, RootMoveStats, SearchConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PuzzleKind {
    /// Find the unique optimal move at every own turn of a fixed line.
    UniqueMultiStep,
    /// One move, graded against a per-move score table.
    MultiChoiceScored,
    /// Predict the position's value within a threshold.
    ValueThreshold,
}

impl PuzzleKind {
    pub const ALL: [PuzzleKind; 3] = [
        PuzzleKind::UniqueMultiStep,
        PuzzleKind::MultiChoiceScored,
        PuzzleKind::ValueThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PuzzleKind::UniqueMultiStep => "unique",
            PuzzleKind::MultiChoiceScored => "multi-choice",
            PuzzleKind::ValueThreshold => "value-threshold",
        }
    }

    pub fn parse(name: &str) -> Option<PuzzleKind> {
        match name {
            "unique" => Some(PuzzleKind::UniqueMultiStep),
            "multi-choice" => Some(PuzzleKind::MultiChoiceScored),
            "value-threshold" => Some(PuzzleKind::ValueThreshold),
            _ => None,
        }
    }
}

/// A node of a unique-solution tree, always described from the solving
/// side's perspective.
#[derive(Clone, Debug, PartialEq)]
pub enum SolutionNode {
    /// Solver to move: any listed alternative earns the step, each with its
    /// own continuation.
    Ours(Vec<(MoveId, SolutionNode)>),
    /// Opponent to move: every listed reply must be answered correctly.
    Theirs(Vec<(MoveId, SolutionNode)>),
    /// Line complete.
    Done,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PuzzleBody {
    Unique { solution: SolutionNode },
    /// Per-move scores in [0, 1000], best entry exactly 1000; moves not
    /// listed score 0.
    MultiChoice { scores: Vec<(MoveId, u32)> },
    /// True value on the win-rate scale {0, 0.5, 1} and the acceptance
    /// threshold (0.25 or 0.1).
    ValueThreshold { true_value: f64, threshold: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Puzzle {
    pub id: String,
    /// First-two-plies opening family, for held-out-family splits.
    pub family: String,
    pub position: GameState,
    pub body: PuzzleBody,
}

impl Puzzle {
    pub fn kind(&self) -> PuzzleKind {
        match self.body {
            PuzzleBody::Unique { .. } => PuzzleKind::UniqueMultiStep,
            PuzzleBody::MultiChoice { .. } => PuzzleKind::MultiChoiceScored,
            PuzzleBody::ValueThreshold { .. } => PuzzleKind::ValueThreshold,
        }
    }

    /// States along the first solution branch (after each move, terminal
    /// included); empty for non-unique kinds. Training uses the non-terminal
    /// ones as intermediate start positions.
    pub fn principal_line(&self) -> Vec<GameState> {
        let PuzzleBody::Unique { solution } = &self.body else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut state = self.position.clone();
        let mut node = solution;
        loop {
            let (mv, next) = match node {
                SolutionNode::Done => break,
                SolutionNode::Ours(alts) => &alts[0],
                SolutionNode::Theirs(branches) => &branches[0],
            };
            state = state.apply_move(*mv).expect("validated solution line");
            out.push(state.clone());
            node = next;
        }
        out
    }

    /// Number of solver moves along the longest branch.
    pub fn solution_depth(&self) -> usize {
        fn depth(node: &SolutionNode) -> usize {
            match node {
                SolutionNode::Done => 0,
                SolutionNode::Ours(alts) => {
                    1 + alts.iter().map(|(_, n)| depth(n)).max().unwrap_or(0)
                }
                SolutionNode::Theirs(branches) => {
                    branches.iter().map(|(_, n)| depth(n)).max().unwrap_or(0)
                }
            }
        }
        match &self.body {
            PuzzleBody::Unique { solution } => depth(solution),
            _ => 0,
        }
    }
}

/// A candidate answer, shaped by the puzzle kind.
#[derive(Clone, Debug, PartialEq)]
pub enum PuzzleResponse {
    /// Moves in depth-first branch order: each own turn consumes one entry,
    /// "and" branches are visited in their listed order.
    Moves(Vec<MoveId>),
    /// Predicted value on the win-rate scale.
    Value { predicted: f64 },
}

// ---------------------------------------------------------------------------
// Scoring

/// Walk a solution tree, asking `choose` for a move at every solver turn.
/// Returns whether every branch was answered acceptably. `choose` may
/// return `None` to concede (used by sequence scoring when the provided
/// moves run out).
fn walk_unique<F>(
    state: &GameState,
    node: &SolutionNode,
    choose: &mut F,
) -> Result<bool, EvaluationError>
where
    F: FnMut(&GameState) -> Result<Option<MoveId>, EvaluationError>,
{
    match node {
        SolutionNode::Done => Ok(true),
        SolutionNode::Ours(alts) => {
            let Some(mv) = choose(state)? else {
                return Ok(false);
            };
            let Some((_, next)) = alts.iter().find(|(m, _)| *m == mv) else {
                return Ok(false);
            };
            let child = state.apply_move(mv)?;
            walk_unique(&child, next, choose)
        }
        SolutionNode::Theirs(branches) => {
            for (reply, next) in branches {
                let child = state.apply_move(*reply)?;
                if !walk_unique(&child, next, choose)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Score a prepared response against a puzzle. Unique trees demand every
/// branch solved (1 or 0); multi-choice grades the single move against the
/// score table (missing moves score 0); value puzzles compare the predicted
/// value against the truth at the stored threshold.
pub fn score_puzzle(response: &PuzzleResponse, puzzle: &Puzzle) -> Result<f64, EvaluationError> {
    match (&puzzle.body, response) {
        (PuzzleBody::Unique { solution }, PuzzleResponse::Moves(seq)) => {
            let mut feed = seq.iter();
            let solved = walk_unique(&puzzle.position, solution, &mut |_s| {
                Ok(feed.next().copied())
            })?;
            Ok(if solved { 1.0 } else { 0.0 })
        }
        (PuzzleBody::MultiChoice { scores }, PuzzleResponse::Moves(seq)) => {
            if seq.len() != 1 {
                return Err(EvaluationError::KindMismatch {
                    expected: "a single move for a multi-choice puzzle",
                });
            }
            let raw = scores
                .iter()
                .find(|(m, _)| *m == seq[0])
                .map(|(_, s)| *s)
                .unwrap_or(0);
            Ok(f64::from(raw) / 1000.0)
        }
        (
            PuzzleBody::ValueThreshold {
                true_value,
                threshold,
            },
            PuzzleResponse::Value { predicted },
        ) => Ok(if (predicted - true_value).abs() <= *threshold {
            1.0
        } else {
            0.0
        }),
        (PuzzleBody::Unique { .. }, _) => Err(EvaluationError::KindMismatch {
            expected: "a move sequence for a unique-solution puzzle",
        }),
        (PuzzleBody::MultiChoice { .. }, _) => Err(EvaluationError::KindMismatch {
            expected: "a single move for a multi-choice puzzle",
        }),
        (PuzzleBody::ValueThreshold { .. }, _) => Err(EvaluationError::KindMismatch {
            expected: "a value prediction for a value-threshold puzzle",
        }),
    }
}

// ---------------------------------------------------------------------------
// Search-driven solving

/// Solve one puzzle with one player's searches and return its score along
/// with the root statistics of the first search (the raw material for
/// sub-additive selection). Searches run without intrinsic rewards: the
/// final-evaluation rule is greedy play on extrinsic value alone, with
/// visit ties resolved toward the smaller move id for reproducibility.
fn solve_with_root(
    puzzle: &Puzzle,
    evaluator: &dyn Evaluate,
    latent: usize,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<RootMoveStats>), EvaluationError> {
    let root = run_search(&puzzle.position, latent, evaluator, None, config, rng)?;
    let root_stats = root.stats.clone();
    let score = match &puzzle.body {
        PuzzleBody::Unique { solution } => {
            let mut first = Some(root);
            let solved = walk_unique(&puzzle.position, solution, &mut |s| {
                let result = match first.take() {
                    Some(r) => r,
                    None => run_search(s, latent, evaluator, None, config, rng)?,
                };
                Ok(Some(result.best_move()))
            })?;
            if solved {
                1.0
            } else {
                0.0
            }
        }
        PuzzleBody::MultiChoice { .. } => {
            let mv = root.best_move();
            score_puzzle(&PuzzleResponse::Moves(vec![mv]), puzzle)?
        }
        PuzzleBody::ValueThreshold { .. } => {
            let mv = root.best_move();
            let q = root
                .stats
                .iter()
                .find(|s| s.mv == mv)
                .map(|s| s.q)
                .unwrap_or(0.0);
            score_puzzle(
                &PuzzleResponse::Value {
                    predicted: (q + 1.0) / 2.0,
                },
                puzzle,
            )?
        }
    };
    Ok((score, root_stats))
}

/// Score one player on one puzzle.
pub fn solve_puzzle(
    puzzle: &Puzzle,
    evaluator: &dyn Evaluate,
    latent: usize,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64, EvaluationError> {
    solve_with_root(puzzle, evaluator, latent, config, rng).map(|(score, _)| score)
}

/// Per-player scores and pooled root statistics for one puzzle.
#[derive(Clone, Debug)]
pub struct TeamPuzzleResult {
    pub per_player: Vec<f64>,
    pub stats: PlayerSearchStats,
}

impl TeamPuzzleResult {
    pub fn max_over_latents(&self) -> f64 {
        super::max_over_latents(&self.per_player).expect("team results are never empty")
    }

    /// The chosen player under `rule` and the score it earned on this
    /// puzzle. By construction never above [`Self::max_over_latents`].
    pub fn subadditive(&self, rule: SelectionRule) -> Result<(usize, f64), EvaluationError> {
        let (player, _mv) = super::subadditive_select(&self.stats, rule)?;
        Ok((player, self.per_player[player]))
    }
}

/// Run every player of a team over one puzzle. Player searches are
/// independent (and run concurrently); each draws from its own stream of
/// `seed`, so results do not depend on scheduling. The root statistics come
/// from the same searches that produced the scores, so a sub-additive
/// choice always refers to the play that actually happened.
pub fn evaluate_team_on_puzzle(
    puzzle: &Puzzle,
    evaluator: &(dyn Evaluate + Sync),
    n_players: usize,
    config: &SearchConfig,
    seed: u64,
) -> Result<TeamPuzzleResult, EvaluationError> {
    if n_players == 0 {
        return Err(EvaluationError::EmptyTeam);
    }
    let runs: Vec<Result<(f64, Vec<RootMoveStats>), EvaluationError>> = (0..n_players)
        .into_par_iter()
        .map(|latent| {
            let mut rng = rng_for(seed, Stream::Evaluation, latent as u64);
            solve_with_root(puzzle, evaluator, latent, config, &mut rng)
        })
        .collect();
    let mut per_player = Vec::with_capacity(n_players);
    let mut players = Vec::with_capacity(n_players);
    for run in runs {
        let (score, stats) = run?;
        per_player.push(score);
        players.push(stats);
    }
    Ok(TeamPuzzleResult {
        per_player,
        stats: PlayerSearchStats { players },
    })
}

// ---------------------------------------------------------------------------
// Generation

/// What the generator keeps. Defaults: all three kinds, unique lines of 2+
/// own moves, no hardness filter, fortress margin 1, threshold 0.25.
#[derive(Clone, Debug)]
pub struct PuzzleCriteria {
    pub kinds: Vec<PuzzleKind>,
    /// Minimum/maximum solver moves in a unique line.
    pub min_steps: usize,
    pub max_steps: usize,
    /// Keep only positions where the baseline's most-likely move (prior
    /// argmax, no search) is suboptimal.
    pub require_hardness: bool,
    /// Fortress margin: opponent must lead the mover by at least this many
    /// immediate completion threats while the position is a draw.
    pub threat_margin: usize,
    /// Value-threshold acceptance band, 0.25 or 0.1.
    pub threshold: f64,
    pub max_per_kind: usize,
    /// Stop expanding the scan beyond this ply depth (None = exhaustive).
    pub max_scan_depth: Option<u32>,
}

impl Default for PuzzleCriteria {
    fn default() -> PuzzleCriteria {
        PuzzleCriteria {
            kinds: PuzzleKind::ALL.to_vec(),
            min_steps: 2,
            max_steps: 16,
            require_hardness: false,
            threat_margin: 1,
            threshold: 0.25,
            max_per_kind: usize::MAX,
            max_scan_depth: None,
        }
    }
}

impl PuzzleCriteria {
    fn validate(&self, baseline: Option<&dyn Evaluate>) -> Result<(), EvaluationError> {
        if self.kinds.is_empty() {
            return Err(EvaluationError::InvalidCriteria {
                message: "no puzzle kinds requested".to_string(),
            });
        }
        if self.min_steps == 0 || self.min_steps > self.max_steps {
            return Err(EvaluationError::InvalidCriteria {
                message: format!(
                    "step bounds {}..={} are empty or start at zero",
                    self.min_steps, self.max_steps
                ),
            });
        }
        if self.threshold != 0.25 && self.threshold != 0.1 {
            return Err(EvaluationError::InvalidCriteria {
                message: format!("threshold {} is not one of 0.25 / 0.1", self.threshold),
            });
        }
        if self.require_hardness && baseline.is_none() {
            return Err(EvaluationError::InvalidCriteria {
                message: "hardness filter requested without baseline parameters".to_string(),
            });
        }
        Ok(())
    }
}

/// Number of winning windows `player` can complete with a single stone:
/// all but one cell owned, the last empty. A crude material readout — for
/// connect-four it ignores gravity on purpose, the same way piece counts
/// ignore position. Fortress positions are exactly where it misleads.
pub fn threat_count(state: &GameState, player: Player) -> usize {
    let cells = state.cells();
    state
        .spec()
        .win_windows()
        .iter()
        .filter(|window| {
            let mut own = 0;
            let mut empty = 0;
            for &c in window.iter() {
                match cells[c] {
                    Some(p) if p == player => own += 1,
                    None => empty += 1,
                    Some(_) => return false,
                }
            }
            own == window.len() - 1 && empty == 1
        })
        .count()
}

/// The move the baseline would play without searching: prior argmax over
/// legal moves, smaller id on ties.
fn baseline_greedy(
    state: &GameState,
    baseline: &dyn Evaluate,
) -> Result<MoveId, EvaluationError> {
    let out = baseline.evaluate(state, 0)?;
    let mut best: Option<(MoveId, f64)> = None;
    for mv in state.legal_moves() {
        let p = out.p[mv.0];
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((mv, p));
        }
    }
    Ok(best.expect("non-terminal states have legal moves").0)
}

/// Follow oracle play from `start` while the mover-to-solve's optimal move
/// stays unique, recording the solver moves and the canonical opponent
/// replies (smallest-id optimal). Returns the singleton solution tree and
/// its depth if the chain reaches a terminal state.
fn unique_chain(
    start: &GameState,
    solver: &mut MinimaxSolver,
    max_steps: usize,
) -> Option<(SolutionNode, usize)> {
    let mut plies: Vec<MoveId> = Vec::new();
    let mut state = start.clone();
    let mut own_moves = 0usize;
    loop {
        let sol = solver.solve(&state);
        if sol.optimal.len() != 1 {
            return None;
        }
        let mv = *sol.optimal.iter().next().expect("singleton");
        own_moves += 1;
        if own_moves > max_steps {
            return None;
        }
        state = state.apply_move(mv).expect("optimal move applies");
        plies.push(mv);
        if state.is_terminal() {
            break;
        }
        let reply = *solver
            .solve(&state)
            .optimal
            .iter()
            .next()
            .expect("non-terminal positions have optimal moves");
        state = state.apply_move(reply).expect("optimal move applies");
        plies.push(reply);
        if state.is_terminal() {
            break;
        }
    }
    // Fold the ply list into nested singleton nodes, solver side first.
    let mut node = SolutionNode::Done;
    let mut ours = plies.len() % 2 == 1;
    for &mv in plies.iter().rev() {
        node = if ours {
            SolutionNode::Ours(vec![(mv, node)])
        } else {
            SolutionNode::Theirs(vec![(mv, node)])
        };
        ours = !ours;
    }
    Some((node, own_moves))
}

/// Enumerate reachable positions and keep the ones passing the criteria.
/// Scan order is breadth-first with moves in ascending id order, so output
/// is deterministic; ids carry a kind prefix and a scan sequence number.
pub fn generate_puzzles(
    spec: &GameSpec,
    solver: &mut MinimaxSolver,
    baseline: Option<&dyn Evaluate>,
    criteria: &PuzzleCriteria,
) -> Result<Vec<Puzzle>, EvaluationError> {
    criteria.validate(baseline)?;
    let wants = |k: PuzzleKind| criteria.kinds.contains(&k);
    let mut unique: Vec<Puzzle> = Vec::new();
    let mut choice: Vec<Puzzle> = Vec::new();
    let mut value: Vec<Puzzle> = Vec::new();

    let mut seen: HashSet<u64> = HashSet::new();
    let mut queue: VecDeque<(GameState, String)> = VecDeque::new();
    let root = GameState::initial(*spec);
    seen.insert(root.state_key());
    queue.push_back((root, String::new()));

    while let Some((state, family)) = queue.pop_front() {
        let full = |bucket: &Vec<Puzzle>| bucket.len() >= criteria.max_per_kind;
        if (!wants(PuzzleKind::UniqueMultiStep) || full(&unique))
            && (!wants(PuzzleKind::MultiChoiceScored) || full(&choice))
            && (!wants(PuzzleKind::ValueThreshold) || full(&value))
        {
            break;
        }
        if !state.is_terminal() {
            let sol = solver.solve(&state);
            let hard = match baseline {
                Some(b) if criteria.require_hardness => {
                    !sol.optimal.contains(&baseline_greedy(&state, b)?)
                }
                _ => true,
            };
            let family_name = if family.is_empty() {
                "root".to_string()
            } else {
                family.clone()
            };
            if hard {
                if wants(PuzzleKind::UniqueMultiStep) && !full(&unique) && sol.optimal.len() == 1
                {
                    if let Some((solution, steps)) =
                        unique_chain(&state, solver, criteria.max_steps)
                    {
                        if steps >= criteria.min_steps {
                            unique.push(Puzzle {
                                id: format!("u{:05}", unique.len()),
                                family: family_name.clone(),
                                position: state.clone(),
                                body: PuzzleBody::Unique { solution },
                            });
                        }
                    }
                }
                if wants(PuzzleKind::MultiChoiceScored) && !full(&choice) {
                    let legal = state.legal_moves();
                    if legal.len() >= 2 && sol.optimal.len() < legal.len() {
                        let scores: Vec<(MoveId, u32)> = legal
                            .iter()
                            .map(|&m| (m, if sol.optimal.contains(&m) { 1000 } else { 0 }))
                            .collect();
                        choice.push(Puzzle {
                            id: format!("m{:05}", choice.len()),
                            family: family_name.clone(),
                            position: state.clone(),
                            body: PuzzleBody::MultiChoice { scores },
                        });
                    }
                }
                if wants(PuzzleKind::ValueThreshold) && !full(&value) && sol.value == 0 {
                    let mover = state.to_move();
                    let against = threat_count(&state, mover.other());
                    let own = threat_count(&state, mover);
                    if against >= own + criteria.threat_margin {
                        value.push(Puzzle {
                            id: format!("v{:05}", value.len()),
                            family: family_name,
                            position: state.clone(),
                            body: PuzzleBody::ValueThreshold {
                                true_value: 0.5,
                                threshold: criteria.threshold,
                            },
                        });
                    }
                }
            }
        }
        if criteria
            .max_scan_depth
            .is_some_and(|cap| state.move_count() >= cap)
        {
            continue;
        }
        for mv in state.legal_moves() {
            let child = state.apply_move(mv).expect("legal move applies");
            if seen.insert(child.state_key()) {
                let child_family = if state.move_count() < 2 {
                    if family.is_empty() {
                        format!("{}", mv.0)
                    } else {
                        format!("{family}-{}", mv.0)
                    }
                } else {
                    family.clone()
                };
                queue.push_back((child, child_family));
            }
        }
    }

    // Re-verify every unique solution against a fresh oracle before
    // handing the set out; a failure here is a generator bug.
    let mut check = MinimaxSolver::new();
    for puzzle in &unique {
        assert!(
            verify_unique_solution(puzzle, &mut check),
            "generated puzzle {} failed independent re-verification",
            puzzle.id
        );
    }

    let mut out = unique;
    out.append(&mut choice);
    out.append(&mut value);
    Ok(out)
}

/// Check a unique puzzle's whole tree against the oracle: every solver
/// alternative must be the position's only optimal move and every stored
/// opponent reply must be optimal for the opponent.
pub fn verify_unique_solution(puzzle: &Puzzle, solver: &mut MinimaxSolver) -> bool {
    fn check(state: &GameState, node: &SolutionNode, solver: &mut MinimaxSolver) -> bool {
        match node {
            SolutionNode::Done => true,
            SolutionNode::Ours(alts) => {
                let sol = solver.solve(state);
                alts.iter().all(|(mv, next)| {
                    sol.optimal.len() == 1
                        && sol.optimal.contains(mv)
                        && check(&state.apply_move(*mv).expect("legal"), next, solver)
                })
            }
            SolutionNode::Theirs(branches) => {
                let sol = solver.solve(state);
                branches.iter().all(|(mv, next)| {
                    sol.optimal.contains(mv)
                        && check(&state.apply_move(*mv).expect("legal"), next, solver)
                })
            }
        }
    }
    match &puzzle.body {
        PuzzleBody::Unique { solution } => check(&puzzle.position, solution, solver),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Text format

/// Serialize puzzles to the line format `id|family|position|kind|spec`.
/// Solution trees use `{m:node/...}` for own turns (alternatives),
/// `[m:node&...]` for opponent turns (branches), and `.` for a finished
/// line.
pub fn puzzles_to_text(puzzles: &[Puzzle]) -> String {
    let mut out = String::new();
    for p in puzzles {
        let spec = match &p.body {
            PuzzleBody::Unique { solution } => write_node(solution),
            PuzzleBody::MultiChoice { scores } => scores
                .iter()
                .map(|(m, s)| format!("{}={}", m.0, s))
                .collect::<Vec<_>>()
                .join(","),
            PuzzleBody::ValueThreshold {
                true_value,
                threshold,
            } => format!("true={true_value},thr={threshold}"),
        };
        out.push_str(&format!(
            "{}|{}|{}|{}|{}\n",
            p.id,
            p.family,
            position_to_line(&p.position),
            p.kind().name(),
            spec
        ));
    }
    out
}

fn write_node(node: &SolutionNode) -> String {
    match node {
        SolutionNode::Done => ".".to_string(),
        SolutionNode::Ours(alts) => {
            let parts: Vec<String> = alts
                .iter()
                .map(|(m, n)| format!("{}:{}", m.0, write_node(n)))
                .collect();
            format!("{{{}}}", parts.join("/"))
        }
        SolutionNode::Theirs(branches) => {
            let parts: Vec<String> = branches
                .iter()
                .map(|(m, n)| format!("{}:{}", m.0, write_node(n)))
                .collect();
            format!("[{}]", parts.join("&"))
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl Cursor<'_> {
    fn fail(&self, message: impl Into<String>) -> EvaluationError {
        EvaluationError::PuzzleParse {
            line: self.line,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, want: u8) -> Result<(), EvaluationError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.fail(format!(
                "expected '{}' at byte {} of the solution spec",
                want as char, self.pos
            )))
        }
    }

    fn number(&mut self) -> Result<usize, EvaluationError> {
        let start = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.fail(format!("expected a move id at byte {}", self.pos)));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are utf8")
            .parse()
            .map_err(|_| self.fail("move id overflows"))
    }

    fn node(&mut self) -> Result<SolutionNode, EvaluationError> {
        match self.peek() {
            Some(b'.') => {
                self.pos += 1;
                Ok(SolutionNode::Done)
            }
            Some(b'{') => {
                self.pos += 1;
                let mut alts = Vec::new();
                loop {
                    let mv = self.number()?;
                    self.eat(b':')?;
                    alts.push((MoveId(mv), self.node()?));
                    match self.peek() {
                        Some(b'/') => self.pos += 1,
                        Some(b'}') => {
                            self.pos += 1;
                            return Ok(SolutionNode::Ours(alts));
                        }
                        _ => return Err(self.fail("expected '/' or '}' in an alternative list")),
                    }
                }
            }
            Some(b'[') => {
                self.pos += 1;
                let mut branches = Vec::new();
                loop {
                    let mv = self.number()?;
                    self.eat(b':')?;
                    branches.push((MoveId(mv), self.node()?));
                    match self.peek() {
                        Some(b'&') => self.pos += 1,
                        Some(b']') => {
                            self.pos += 1;
                            return Ok(SolutionNode::Theirs(branches));
                        }
                        _ => return Err(self.fail("expected '&' or ']' in a branch list")),
                    }
                }
            }
            _ => Err(self.fail(format!("expected a solution node at byte {}", self.pos))),
        }
    }
}

fn parse_solution(spec: &str, line: usize) -> Result<SolutionNode, EvaluationError> {
    let mut cursor = Cursor {
        bytes: spec.as_bytes(),
        pos: 0,
        line,
    };
    let node = cursor.node()?;
    if cursor.pos != cursor.bytes.len() {
        return Err(cursor.fail("trailing characters after the solution tree"));
    }
    Ok(node)
}

/// Structural checks tying a solution tree to its position: correct side
/// to move at every level, legal and distinct moves, lines that stop at
/// terminal states, and a solver turn at the root.
fn validate_solution(
    position: &GameState,
    node: &SolutionNode,
    line: usize,
) -> Result<(), EvaluationError> {
    fn walk(
        state: &GameState,
        node: &SolutionNode,
        agent: Player,
        line: usize,
    ) -> Result<(), EvaluationError> {
        let fail = |message: String| EvaluationError::PuzzleParse { line, message };
        let children = match node {
            SolutionNode::Done => return Ok(()),
            SolutionNode::Ours(alts) => {
                if state.to_move() != agent {
                    return Err(fail("alternative list on the opponent's turn".into()));
                }
                alts
            }
            SolutionNode::Theirs(branches) => {
                if state.to_move() == agent {
                    return Err(fail("branch list on the solver's turn".into()));
                }
                branches
            }
        };
        if state.is_terminal() {
            return Err(fail("solution continues past the end of the game".into()));
        }
        if children.is_empty() {
            return Err(fail("empty move list in the solution tree".into()));
        }
        let mut used = BTreeSet::new();
        for (mv, next) in children {
            if !state.is_legal(*mv) {
                return Err(fail(format!("illegal move {} in the solution tree", mv.0)));
            }
            if !used.insert(*mv) {
                return Err(fail(format!("duplicate move {} in one node", mv.0)));
            }
            walk(&state.apply_move(*mv).expect("checked legal"), next, agent, line)?;
        }
        Ok(())
    }
    if matches!(node, SolutionNode::Theirs(_) | SolutionNode::Done) {
        return Err(EvaluationError::PuzzleParse {
            line,
            message: "a unique puzzle must open on the solver's turn".into(),
        });
    }
    walk(position, node, position.to_move(), line)
}

/// Parse a puzzle file: one `id|family|position|kind|spec` record per
/// line, `#` comments and blank lines ignored, duplicate ids rejected.
pub fn parse_puzzles(text: &str) -> Result<Vec<Puzzle>, EvaluationError> {
    let mut out = Vec::new();
    let mut ids: BTreeSet<String> = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fail = |message: String| EvaluationError::PuzzleParse { line, message };
        let fields: Vec<&str> = trimmed.split('|').collect();
        if fields.len() != 5 {
            return Err(fail(format!("expected 5 |-separated fields, got {}", fields.len())));
        }
        let (id, family, pos_text, kind_name, spec) =
            (fields[0], fields[1], fields[2], fields[3], fields[4]);
        if id.is_empty() || !ids.insert(id.to_string()) {
            return Err(fail(format!("missing or duplicate puzzle id {id:?}")));
        }
        let position = position_from_line(pos_text)
            .map_err(|e| fail(format!("bad position: {e}")))?;
        if position.is_terminal() {
            return Err(fail("puzzle position is terminal".into()));
        }
        let kind = PuzzleKind::parse(kind_name)
            .ok_or_else(|| fail(format!("unknown puzzle kind {kind_name:?}")))?;
        let body = match kind {
            PuzzleKind::UniqueMultiStep => {
                let solution = parse_solution(spec, line)?;
                validate_solution(&position, &solution, line)?;
                PuzzleBody::Unique { solution }
            }
            PuzzleKind::MultiChoiceScored => {
                let mut scores = Vec::new();
                let mut seen_moves = BTreeSet::new();
                for part in spec.split(',') {
                    let (m, s) = part
                        .split_once('=')
                        .ok_or_else(|| fail(format!("bad score entry {part:?}")))?;
                    let mv = MoveId(m.parse().map_err(|_| fail(format!("bad move {m:?}")))?);
                    let score: u32 = s.parse().map_err(|_| fail(format!("bad score {s:?}")))?;
                    if score > 1000 {
                        return Err(fail(format!("score {score} above 1000")));
                    }
                    if !position.is_legal(mv) {
                        return Err(fail(format!("scored move {} is illegal", mv.0)));
                    }
                    if !seen_moves.insert(mv) {
                        return Err(fail(format!("move {} scored twice", mv.0)));
                    }
                    scores.push((mv, score));
                }
                if scores.iter().map(|(_, s)| *s).max() != Some(1000) {
                    return Err(fail("best multi-choice score must be exactly 1000".into()));
                }
                PuzzleBody::MultiChoice { scores }
            }
            PuzzleKind::ValueThreshold => {
                let mut true_value = None;
                let mut threshold = None;
                for part in spec.split(',') {
                    match part.split_once('=') {
                        Some(("true", v)) => {
                            true_value =
                                Some(v.parse::<f64>().map_err(|_| fail(format!("bad value {v:?}")))?)
                        }
                        Some(("thr", v)) => {
                            threshold =
                                Some(v.parse::<f64>().map_err(|_| fail(format!("bad threshold {v:?}")))?)
                        }
                        _ => return Err(fail(format!("bad value entry {part:?}"))),
                    }
                }
                let true_value =
                    true_value.ok_or_else(|| fail("missing true value".into()))?;
                let threshold = threshold.ok_or_else(|| fail("missing threshold".into()))?;
                if ![0.0, 0.5, 1.0].contains(&true_value) {
                    return Err(fail(format!("true value {true_value} not in {{0, 0.5, 1}}")));
                }
                if threshold != 0.25 && threshold != 0.1 {
                    return Err(fail(format!("threshold {threshold} not one of 0.25 / 0.1")));
                }
                PuzzleBody::ValueThreshold {
                    true_value,
                    threshold,
                }
            }
        };
        out.push(Puzzle {
            id: id.to_string(),
            family: family.to_string(),
            position,
            body,
        });
    }
    Ok(out)
}

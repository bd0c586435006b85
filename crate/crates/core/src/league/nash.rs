//! Exact mixed equilibria of zero-sum matrix games.
//!
//! The row player maximizes `xᵀAy`, the column player minimizes it. The
//! solver reduces the game to a linear program by the classic shift trick:
//! with every entry of `A' = A + k` positive, the column program
//! `max Σy  s.t.  A'y ≤ 1, y ≥ 0` has optimum `1/v'` where `v'` is the
//! shifted game value, the optimal `y` rescales to the column mixture, and
//! the dual values under the slack columns rescale to the row mixture. The
//! LP itself is solved with a dense tableau simplex using Bland's rule, so
//! it terminates deterministically even on degenerate games.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NashError {
    #[error("payoff matrix is empty")]
    EmptyMatrix,
    #[error("payoff matrix is ragged: row {row} has {got} entries, expected {expected}")]
    RaggedMatrix {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("payoff entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
}

/// An equilibrium of a zero-sum matrix game, from the row player's
/// perspective.
#[derive(Clone, Debug)]
pub struct NashSolution {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub value: f64,
}

/// Solve the zero-sum game with row-player payoffs `a` (rows maximize).
pub fn solve_nash(a: &[Vec<f64>]) -> Result<NashSolution, NashError> {
    let m = a.len();
    if m == 0 || a[0].is_empty() {
        return Err(NashError::EmptyMatrix);
    }
    let n = a[0].len();
    let mut min_entry = f64::INFINITY;
    for (r, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(NashError::RaggedMatrix {
                row: r,
                got: row.len(),
                expected: n,
            });
        }
        for (c, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(NashError::NonFiniteEntry { row: r, col: c });
            }
            min_entry = min_entry.min(x);
        }
    }
    let shift = 1.0 - min_entry;

    // Tableau for: max Σ_j y_j  s.t.  Σ_j (a[i][j]+shift)·y_j ≤ 1 ∀i, y ≥ 0.
    // Columns: n structural, m slack, then the RHS. The slack basis is an
    // immediately feasible start because the RHS is positive.
    let cols = n + m + 1;
    let mut tab = vec![vec![0.0; cols]; m + 1];
    for i in 0..m {
        for j in 0..n {
            tab[i][j] = a[i][j] + shift;
        }
        tab[i][n + i] = 1.0;
        tab[i][cols - 1] = 1.0;
    }
    // Objective row holds z_j − c_j, so structural columns start at −1.
    for j in 0..n {
        tab[m][j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    const TOL: f64 = 1e-12;
    loop {
        // Bland: the lowest-index improving column enters.
        let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -TOL) else {
            break;
        };
        // Ratio test; Bland again on ties (lowest basic variable leaves).
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[i][enter] > TOL {
                let ratio = tab[i][cols - 1] / tab[i][enter];
                let better = ratio < best - TOL
                    || (ratio < best + TOL
                        && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let leave = leave.expect("bounded feasible region: some ratio exists");
        pivot(&mut tab, leave, enter);
        basis[leave] = enter;
    }

    let mut y = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            y[b] = tab[i][cols - 1];
        }
    }
    // Dual values live in the objective row under the slack columns.
    let u: Vec<f64> = (0..m).map(|i| tab[m][n + i].max(0.0)).collect();

    let y_sum: f64 = y.iter().sum();
    let u_sum: f64 = u.iter().sum();
    debug_assert!(y_sum > 0.0 && u_sum > 0.0);
    let value = 1.0 / y_sum - shift;
    Ok(NashSolution {
        row: u.iter().map(|&x| x / u_sum).collect(),
        col: y.iter().map(|&x| x / y_sum).collect(),
        value,
    })
}

fn pivot(tab: &mut [Vec<f64>], pr: usize, pc: usize) {
    let cols = tab[0].len();
    let inv = 1.0 / tab[pr][pc];
    for x in tab[pr].iter_mut() {
        *x *= inv;
    }
    for r in 0..tab.len() {
        if r == pr {
            continue;
        }
        let factor = tab[r][pc];
        if factor == 0.0 {
            continue;
        }
        for c in 0..cols {
            let delta = factor * tab[pr][c];
            tab[r][c] -= delta;
        }
        tab[r][pc] = 0.0;
    }
}

/// How much either side could still gain by deviating from the proposed
/// mixtures: `max_i (Ay)_i − min_j (xᵀA)_j`. Zero exactly at equilibrium.
pub fn nash_gap(a: &[Vec<f64>], row: &[f64], col: &[f64]) -> f64 {
    let m = a.len();
    let n = a[0].len();
    let best_row = (0..m)
        .map(|i| (0..n).map(|j| a[i][j] * col[j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let best_col = (0..n)
        .map(|j| (0..m).map(|i| row[i] * a[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    best_row - best_col
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_for, Stream};
    use rand::Rng;

    #[test]
    fn rock_paper_scissors_mixes_uniformly() {
        let a = vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ];
        let sol = solve_nash(&a).unwrap();
        for p in sol.row.iter().chain(&sol.col) {
            assert!((p - 1.0 / 3.0).abs() < 1e-9, "{:?}", sol);
        }
        assert!(sol.value.abs() < 1e-9);
        assert!(nash_gap(&a, &sol.row, &sol.col) < 1e-6);
    }

    #[test]
    fn dominant_strategies_are_found_pure() {
        let a = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        let sol = solve_nash(&a).unwrap();
        assert!((sol.row[1] - 1.0).abs() < 1e-9, "{:?}", sol.row);
        assert!((sol.col[1] - 1.0).abs() < 1e-9, "{:?}", sol.col);
        assert!(sol.value.abs() < 1e-9);
    }

    #[test]
    fn single_cell_games_are_trivial() {
        let sol = solve_nash(&[vec![-0.75]]).unwrap();
        assert_eq!(sol.row, vec![1.0]);
        assert_eq!(sol.col, vec![1.0]);
        assert!((sol.value + 0.75).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies_value_is_biased_with_payoffs() {
        // Row wins 3 on matched heads, 1 on matched tails, loses 1 on
        // mismatch: x = (1/3, 2/3), value 1/3.
        let a = vec![vec![3.0, -1.0], vec![-1.0, 1.0]];
        let sol = solve_nash(&a).unwrap();
        assert!((sol.value - 1.0 / 3.0).abs() < 1e-9, "{}", sol.value);
        assert!((sol.row[0] - 1.0 / 3.0).abs() < 1e-9, "{:?}", sol.row);
        assert!((sol.col[0] - 1.0 / 3.0).abs() < 1e-9, "{:?}", sol.col);
        assert!(nash_gap(&a, &sol.row, &sol.col) < 1e-6);
    }

    #[test]
    fn degenerate_all_zero_games_still_produce_valid_mixtures() {
        let a = vec![vec![0.0; 3]; 3];
        let sol = solve_nash(&a).unwrap();
        assert!((sol.row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((sol.col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(sol.value.abs() < 1e-9);
        assert!(nash_gap(&a, &sol.row, &sol.col) < 1e-6);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(solve_nash(&[]), Err(NashError::EmptyMatrix)));
        assert!(matches!(
            solve_nash(&[vec![1.0, 2.0], vec![3.0]]),
            Err(NashError::RaggedMatrix { row: 1, .. })
        ));
        assert!(matches!(
            solve_nash(&[vec![f64::NAN]]),
            Err(NashError::NonFiniteEntry { row: 0, col: 0 })
        ));
    }

    /// Fictitious play with envelope bounds: an independent route to the
    /// game value, used to cross-check the simplex solver.
    fn fictitious_play_value(a: &[Vec<f64>], tolerance: f64, max_iters: usize) -> f64 {
        let m = a.len();
        let n = a[0].len();
        let mut row_counts = vec![0.0f64; m];
        let mut col_counts = vec![0.0f64; n];
        row_counts[0] = 1.0;
        col_counts[0] = 1.0;
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        for t in 1..=max_iters {
            let scale = 1.0 / t as f64;
            // Row best response to the column empirical mixture.
            let mut best_row = (0, f64::NEG_INFINITY);
            for i in 0..m {
                let v: f64 = (0..n).map(|j| a[i][j] * col_counts[j] * scale).sum();
                if v > best_row.1 {
                    best_row = (i, v);
                }
            }
            // Column best response to the row empirical mixture.
            let mut best_col = (0, f64::INFINITY);
            for j in 0..n {
                let v: f64 = (0..m).map(|i| a[i][j] * row_counts[i] * scale).sum();
                if v < best_col.1 {
                    best_col = (j, v);
                }
            }
            upper = upper.min(best_row.1);
            lower = lower.max(best_col.1);
            if upper - lower <= tolerance {
                break;
            }
            row_counts[best_row.0] += 1.0;
            col_counts[best_col.0] += 1.0;
        }
        0.5 * (upper + lower)
    }

    #[test]
    fn random_games_agree_with_a_fictitious_play_oracle() {
        for seed in 0..10u64 {
            let mut rng = rng_for(seed, Stream::Evaluation, 31);
            let a: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let sol = solve_nash(&a).unwrap();
            assert!(
                nash_gap(&a, &sol.row, &sol.col) < 1e-6,
                "seed {seed}: gap {}",
                nash_gap(&a, &sol.row, &sol.col)
            );
            let oracle = fictitious_play_value(&a, 5e-5, 2_000_000);
            assert!(
                (sol.value - oracle).abs() < 1e-4,
                "seed {seed}: simplex {} vs oracle {oracle}",
                sol.value
            );
        }
    }
}

//! Timings for the three hot kernels: PUCT search, exact game solving,
//! and matrix-game Nash solving.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use polyzero::{run_search, solve_nash, MinimaxSolver, SearchConfig};
use polyzero_bench::{bench_rng, connect4_root, random_matrix, tictactoe_root, uniform_params};

fn search_throughput(c: &mut Criterion) {
    let mut group = c.benchmark_group("search");
    for sims in [100usize, 800] {
        let config = SearchConfig {
            n_simulations: sims,
            ..SearchConfig::default()
        };
        let root = tictactoe_root();
        let params = uniform_params(*root.spec());
        group.bench_function(format!("tictactoe_{sims}_sims"), |b| {
            let mut i = 0u64;
            b.iter(|| {
                i += 1;
                let mut rng = bench_rng(i);
                black_box(run_search(&root, 0, &params, None, &config, &mut rng).unwrap())
            });
        });
    }
    let config = SearchConfig {
        n_simulations: 100,
        ..SearchConfig::default()
    };
    let root = connect4_root();
    let params = uniform_params(*root.spec());
    group.bench_function("connect4_100_sims", |b| {
        let mut i = 0u64;
        b.iter(|| {
            i += 1;
            let mut rng = bench_rng(i);
            black_box(run_search(&root, 0, &params, None, &config, &mut rng).unwrap())
        });
    });
    group.finish();
}

fn minimax_solve(c: &mut Criterion) {
    c.bench_function("minimax/tictactoe_full", |b| {
        b.iter_batched(
            MinimaxSolver::new,
            |mut solver| black_box(solver.solve(&tictactoe_root())),
            BatchSize::SmallInput,
        );
    });
}

fn nash_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("nash");
    for n in [5usize, 20] {
        let matrix = random_matrix(n, 42);
        group.bench_function(format!("{n}x{n}"), |b| {
            b.iter(|| black_box(solve_nash(&matrix).unwrap()));
        });
    }
    group.finish();
}

criterion_group!(benches, search_throughput, minimax_solve, nash_solve);
criterion_main!(benches);

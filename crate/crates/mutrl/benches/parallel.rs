//! Sequential vs parallel throughput of the pipeline's job runner.
//!
//! The unit of work mirrors the pipeline's hot path: evaluating a trained
//! agent on a batch of environment configurations. Run with
//! `cargo bench --no-default-features` to measure the sequential fallback
//! build instead of a one-worker pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mutrl::agents::{self, Hyperparameters};
use mutrl::envs::{self, EnvKind};
use mutrl::pipeline::jobs;
use mutrl::rng;

fn evaluation_jobs(c: &mut Criterion) {
    let kind = EnvKind::GridBridge;
    let mut hp = Hyperparameters::default_dqn();
    hp.total_steps = 2_000;
    hp.hidden_sizes = vec![32, 32];
    if let agents::AlgoParams::Dqn(p) = &mut hp.algo {
        p.learning_starts = 200;
        p.replay_capacity = 2_000;
    }
    let (agent, _) = agents::train(kind, &hp, 11).expect("bench agent trains");

    let mut stream = rng::stream(7);
    let configs: Vec<_> = (0..64).map(|_| envs::sample_config(kind, &mut stream)).collect();
    let batches: Vec<Vec<_>> = (0..8).map(|_| configs.clone()).collect();

    let mut group = c.benchmark_group("evaluation_jobs");
    group.sample_size(10);
    for workers in [1usize, 0] {
        let label = if workers == 1 { "sequential" } else { "all_cores" };
        group.bench_with_input(BenchmarkId::new(label, workers), &workers, |b, &workers| {
            b.iter(|| {
                jobs::try_par_map(batches.clone(), workers, |batch| {
                    agents::evaluate(&agent, kind, &batch)
                })
                .expect("evaluation succeeds")
            });
        });
    }
    group.finish();
}

criterion_group!(benches, evaluation_jobs);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use storychat_core::classifier::{classify_batch, ClassifierConfig};
use storychat_core::engine::EngineConfig;
use storychat_core::par::Exec;
use storychat_core::sim::{generate, run_seed_sweep, BurstSpec, TrafficProfile};

fn profile() -> TrafficProfile {
    TrafficProfile {
        seed: 1,
        base_rate_per_s: 50.0,
        burst_specs: vec![BurstSpec {
            start_ms: 60_000,
            duration_ms: 30_000,
            negative_rate_per_s: 5.0,
        }],
        ..Default::default()
    }
}

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn classify(c: &mut Criterion) {
    let messages = generate(&profile(), 400_000).unwrap();
    let cfg = ClassifierConfig::default();
    let mut group = c.benchmark_group("classify_batch");
    group.throughput(Throughput::Elements(messages.len() as u64));
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| classify_batch(black_box(&messages), &cfg, exec))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let base = TrafficProfile {
        base_rate_per_s: 1.67,
        ..profile()
    };
    let cfg = EngineConfig::default();
    let seeds: Vec<u64> = (0..32).collect();
    let mut group = c.benchmark_group("seed_sweep_15min");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_seed_sweep(&base, &cfg, 900_000, black_box(&seeds), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, classify, sweep);
criterion_main!(benches);

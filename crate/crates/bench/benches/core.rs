use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use vrbip_bench::{shards, slot};
use vrbip_core::sim::scenario::frame_model;
use vrbip_core::{
    mc_empirical, pooled_ridge, select_association, CapacityQuery, EmpiricalMcConfig, FederatedConfig,
    FederatedState, LinkContext, LinkTable, ScenarioConfig,
};

fn consensus(c: &mut Criterion) {
    let data = shards(30, 2000, 5, 1);
    let cfg = FederatedConfig::default();
    c.bench_function("admm_round_n30_b5", |b| {
        let mut state = FederatedState::new(&data, cfg).unwrap();
        b.iter(|| black_box(state.round()))
    });
    c.bench_function("admm_setup_n30_b5", |b| b.iter(|| FederatedState::new(black_box(&data), cfg).unwrap()));
    c.bench_function("pooled_ridge_n30", |b| b.iter(|| pooled_ridge(black_box(&data), 0.005).unwrap()));
}

fn capacity(c: &mut Criterion) {
    let est = EmpiricalMcConfig {
        length: 20_000,
        ..EmpiricalMcConfig::default()
    };
    let q = CapacityQuery::single(10, 0.9);
    c.bench_function("mc_empirical_n10_20k", |b| b.iter(|| mc_empirical(black_box(&q), &est).unwrap()));
}

fn association(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let (g, draws) = slot(&cfg);
    let frame = frame_model(&cfg).unwrap();
    let ctx = LinkContext {
        radio: &cfg.radio,
        frame: &frame,
        slot_duration: cfg.slot_duration,
    };
    c.bench_function("link_table_u20_b5", |b| {
        b.iter(|| LinkTable::compute(black_box(&g), &g.users, &draws, &cfg.radio).unwrap())
    });
    let table = LinkTable::compute(&g, &g.users, &draws, &cfg.radio).unwrap();
    c.bench_function("select_association_u20_b5", |b| {
        b.iter(|| select_association(black_box(&table), &ctx, cfg.v_cap, &cfg.bandit, 7).unwrap())
    });
}

fn scenario(c: &mut Criterion) {
    let cfg = ScenarioConfig::parse("users = 4\nbase_stations = 3\nt_train = 120\nt_eval = 25\nhorizon = 3\nesn.neurons = 10\n", "bench").unwrap();
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    g.bench_function("small_run", |b| b.iter(|| vrbip_core::run_scenario(black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, consensus, capacity, association, scenario);
criterion_main!(benches);

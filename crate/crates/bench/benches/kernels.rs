use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use gfmfr_core::client::{local_train, make_update, ClientConfig, ClientState, ClientUpdate, SharedParams};
use gfmfr_core::dataio::{generate_synthetic, leave_one_out_split, SyntheticSpec};
use gfmfr_core::engine::{init_federation, run_round, ExperimentConfig};
use gfmfr_core::evalreport::evaluate_all;
use gfmfr_core::numerics::xavier_init;
use gfmfr_core::server::{aggregate, kmeans, train_aggregation_module, FusionModule, KMeansParams};

const M: usize = 500;
const D: usize = 32;
const H: usize = 16;

fn bench_local_train(c: &mut Criterion) {
    let shared = SharedParams::init(M, D, H, 1).unwrap();
    let state = ClientState::new(0, &shared, (0..20).collect(), 2).unwrap();
    let cfg = ClientConfig::default();
    c.bench_function("local_train_5_epochs", |b| {
        b.iter(|| local_train(black_box(&state), &shared, None, 5, 0.0, &cfg, 3).unwrap())
    });
}

fn bench_aggregate(c: &mut Criterion) {
    let shared = SharedParams::init(M, D, H, 1).unwrap();
    let updates: Vec<ClientUpdate> = (0..40)
        .map(|u| {
            let st = ClientState::new(u, &shared, (0..20).collect(), u as u64).unwrap();
            make_update(&st, 0.0, 0).unwrap()
        })
        .collect();
    c.bench_function("aggregate_40_clients", |b| b.iter(|| aggregate(black_box(&updates)).unwrap()));
}

fn bench_kmeans(c: &mut Criterion) {
    let m = xavier_init(40, D * H + 2 * H + 1, 4).unwrap();
    let points: Vec<Vec<f64>> = (0..40).map(|i| m.row(i).to_vec()).collect();
    let params = KMeansParams::default();
    c.bench_function("kmeans_40x561_k4", |b| b.iter(|| kmeans(black_box(&points), 4, &params, 5).unwrap()));
}

fn bench_fusion(c: &mut Criterion) {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let module = FusionModule::init(&data.features, D, 8, 1, 6).unwrap();
    let eg = xavier_init(4, 8, 7).unwrap();
    let targets: Vec<_> = (0..4).map(|g| xavier_init(M, D, 10 + g).unwrap()).collect();
    c.bench_function("fusion_10_steps", |b| {
        b.iter(|| train_aggregation_module(black_box(&module), &eg, &data.features, &targets, 10, 1e-2).unwrap())
    });
}

fn bench_round_and_eval(c: &mut Criterion) {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let split = leave_one_out_split(&data.store).unwrap();
    let cfg = ExperimentConfig { sample_ratio: 0.2, rounds: 10, ..ExperimentConfig::default() };
    let state = init_federation(&cfg, &split, &data.features).unwrap();
    c.bench_function("federated_round", |b| {
        b.iter_batched(
            || state.clone(),
            |s| run_round(s, &cfg, &data.features).unwrap(),
            BatchSize::LargeInput,
        )
    });
    c.bench_function("evaluate_200_users", |b| {
        b.iter(|| evaluate_all(black_box(&state.clients), &split, 50, true).unwrap())
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = bench_local_train, bench_aggregate, bench_kmeans, bench_fusion, bench_round_and_eval
}
criterion_main!(kernels);

use gfmfr_core::dataio::{
    generate_synthetic, leave_one_out_split, load_interactions_with_catalog, load_modality_features,
    write_interactions, write_modality_features, SyntheticSpec,
};
use gfmfr_core::engine::{output, run_experiment, ExperimentConfig, Method};

fn small_spec() -> SyntheticSpec {
    SyntheticSpec { num_users: 40, num_items: 80, interactions_per_user: 8, ..SyntheticSpec::default() }
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        rounds: 6,
        dim: 8,
        hidden: 4,
        group_dim: 3,
        fusion_steps: 10,
        sample_ratio: 0.3,
        top_k: 10,
        ..ExperimentConfig::default()
    }
}

#[test]
fn files_round_trip_into_the_same_run() {
    let data = generate_synthetic(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ip, fp) = (dir.path().join("i.tsv"), dir.path().join("f.gmf"));
    write_interactions(&ip, &data.store).unwrap();
    write_modality_features(&fp, &data.features).unwrap();
    let store = load_interactions_with_catalog(&ip, 80).unwrap().store;
    let features = load_modality_features(&fp, 80).unwrap();

    let cfg = small_config();
    let from_disk = run_experiment(&cfg, &leave_one_out_split(&store).unwrap(), &features).unwrap();
    let again = run_experiment(&cfg, &leave_one_out_split(&store).unwrap(), &features).unwrap();
    assert_eq!(output::metrics_csv(&from_disk), output::metrics_csv(&again));
    assert_eq!(output::trace_csv(&from_disk.traces), output::trace_csv(&again.traces));
    assert_eq!(from_disk.metrics.rows.len(), 6);
    let last = from_disk.metrics.last().unwrap();
    assert!((0.0..=1.0).contains(&last.hr_at_k));
    assert!(last.ndcg_at_k <= last.hr_at_k);
}

#[test]
fn backbone_sends_no_signal() {
    let data = generate_synthetic(&small_spec()).unwrap();
    let split = leave_one_out_split(&data.store).unwrap();
    let g = run_experiment(&small_config(), &split, &data.features).unwrap();
    let b = run_experiment(&ExperimentConfig { method: Method::Backbone, ..small_config() }, &split, &data.features)
        .unwrap();
    assert_eq!(b.efficiency.signal_bytes, 0);
    assert_eq!(g.efficiency.signal_bytes, 80 * 2 * 4);
    assert!(b.traces.iter().all(|t| t.signal_receivers == 0));
    assert!(g.traces.iter().skip(1).all(|t| t.signal_receivers > 0));
    assert_eq!(g.efficiency.upload_bytes_per_client, b.efficiency.upload_bytes_per_client);
}

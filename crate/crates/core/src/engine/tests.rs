use super::*;
use crate::dataio::{generate_synthetic, leave_one_out_split, ModalityFeatures, SplitDataset, SyntheticSpec};

fn plant() -> (SplitDataset, ModalityFeatures) {
    let spec = SyntheticSpec {
        num_users: 30,
        num_items: 60,
        feature_dim: 6,
        interactions_per_user: 8,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    (leave_one_out_split(&data.store).unwrap(), data.features)
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        rounds: 4,
        groups: 2,
        local_epochs: 2,
        sample_ratio: 0.5,
        dim: 8,
        hidden: 4,
        group_dim: 3,
        fusion_steps: 10,
        top_k: 10,
        ..ExperimentConfig::default()
    }
}

#[test]
fn single_round_gives_one_trace_and_one_eval() {
    let (split, f) = plant();
    let mut cfg = small_config();
    cfg.rounds = 1;
    let r = run_experiment(&cfg, &split, &f).unwrap();
    assert_eq!(r.traces.len(), 1);
    assert_eq!(r.metrics.rows.len(), 1);
    assert_eq!(r.traces[0].lambda, 0.0);
    assert_eq!(r.traces[0].signal_source_round, None);
    assert_eq!(r.state.round, 1);
}

#[test]
fn identical_runs_match_bitwise() {
    let (split, f) = plant();
    let cfg = small_config();
    let a = run_experiment(&cfg, &split, &f).unwrap();
    let b = run_experiment(&cfg, &split, &f).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(output::trace_csv(&a.traces), output::trace_csv(&b.traces));
    assert_eq!(a.state.shared, b.state.shared);
}

#[test]
fn zero_lambda_reduces_to_backbone() {
    let (split, f) = plant();
    let mut cfg = small_config();
    cfg.lambda_base = 0.0;
    let g = run_experiment(&cfg, &split, &f).unwrap();
    cfg.method = Method::Backbone;
    let b = run_experiment(&cfg, &split, &f).unwrap();
    assert_eq!(g.metrics, b.metrics);
    assert_eq!(g.state.shared, b.state.shared);
    assert!(g.traces.iter().skip(1).any(|t| t.mean_dis_loss.is_some()));
}

#[test]
fn signals_are_one_round_stale() {
    let (split, f) = plant();
    let r = run_experiment(&small_config(), &split, &f).unwrap();
    for t in &r.traces {
        if let Some(src) = t.signal_source_round {
            assert_eq!(src + 1, t.round);
        }
        assert!(t.churn <= t.churn_eligible);
        assert!(t.lambda >= 0.0);
    }
    assert!(r.traces.iter().any(|t| t.signal_source_round.is_some()));
}

#[test]
fn single_group_pools_the_plain_mean() {
    let (split, f) = plant();
    let mut cfg = small_config();
    cfg.grouping = Grouping::Single;
    cfg.rounds = 1;
    let state = init_federation(&cfg, &split, &f).unwrap();
    let (state, trace) = run_round(state, &cfg, &f).unwrap();
    assert_eq!(state.groups.signals.len(), 1);
    let d = cfg.dim;
    let mut mean = crate::numerics::Matrix::zeros(split.num_items(), d);
    for &u in &trace.sampled {
        let up = crate::client::make_update(&state.clients[u], 0.0, 0).unwrap();
        mean.axpy(1.0, &up.item_embeddings);
    }
    mean.scale(1.0 / trace.sampled.len() as f64);
    for (a, b) in mean.as_slice().iter().zip(state.groups.pooled[0].as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
    for &u in &trace.sampled {
        assert_eq!(state.groups.signal_for(u), Some(&state.groups.signals[0]));
    }
}

#[test]
fn mismatched_features_are_a_config_error() {
    let (split, _) = plant();
    let f = ModalityFeatures::new(vec![crate::numerics::Matrix::zeros(5, 2)]).unwrap();
    let err = run_experiment(&small_config(), &split, &f).unwrap_err();
    assert!(matches!(err, crate::Error::Config(_)));
}

#[test]
fn outputs_have_headers() {
    let (split, f) = plant();
    let r = run_experiment(&small_config(), &split, &f).unwrap();
    let m = output::metrics_csv(&r);
    assert!(m.starts_with("round,k,hr_at_k,ndcg_at_k"));
    assert_eq!(m.lines().count(), 1 + 4);
    assert_eq!(output::groups_csv(&r.traces).lines().next(), Some("round,user_id,group_id"));
}

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::client::{local_train, make_update, Backbone, ClientState, PreferenceSignal, SharedParams};
use crate::dataio::{ModalityFeatures, SplitDataset};
use crate::engine::{
    lambda_schedule, sample_clients, ExperimentConfig, Grouping, Method, ScheduleParams,
};
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Matrix};
use crate::rng::{derive_seed, stream, Stream};
use crate::server::{
    aggregate, cluster_clients, fuse, group_item_embedding, group_pred_fn, map_preference,
    train_aggregation_module, FusionModule, GroupState,
};

/// What happened in one round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundTrace {
    pub round: usize,
    /// Ascending client ids.
    pub sampled: Vec<usize>,
    /// Sampled clients per group after this round's grouping.
    pub group_sizes: Vec<usize>,
    pub mean_rec_loss: f64,
    /// Present when at least one sampled client trained against a signal.
    pub mean_dis_loss: Option<f64>,
    pub lambda: f64,
    pub agg_loss_initial: Option<f64>,
    pub agg_loss_final: Option<f64>,
    /// Sampled clients whose group differs from their previous one.
    pub churn: usize,
    /// Sampled clients that had a previous group.
    pub churn_eligible: usize,
    /// Server round that produced the signals consumed in this round.
    pub signal_source_round: Option<usize>,
    pub signal_receivers: usize,
    /// Fewer sampled clients than groups this round.
    pub groups_reduced: bool,
    /// Per user after this round.
    pub assignments: Vec<Option<usize>>,
    /// Modality weights per group.
    pub attention: Vec<Vec<f64>>,
    /// Wall time of local training; not part of any deterministic output.
    pub train_time_ns: u64,
}

impl RoundTrace {
    pub fn churn_rate(&self) -> Option<f64> {
        (self.churn_eligible > 0).then(|| self.churn as f64 / self.churn_eligible as f64)
    }
}

/// Everything that persists between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationState {
    pub shared: SharedParams,
    pub clients: Vec<ClientState>,
    pub groups: GroupState,
    pub lambda_history: Vec<f64>,
    pub traces: Vec<RoundTrace>,
    pub round: usize,
}

/// A user's private embedding scored against the current shared parameters.
pub struct SharedView<'a> {
    pub user_embedding: &'a [f64],
    pub shared: &'a SharedParams,
}

impl Backbone for SharedView<'_> {
    fn num_items(&self) -> usize {
        self.shared.num_items()
    }

    fn predict(&self, item: usize) -> f64 {
        let x: Vec<f64> = self
            .user_embedding
            .iter()
            .zip(self.shared.item_embeddings.row(item))
            .map(|(u, e)| u * e)
            .collect();
        self.shared.predictor.forward(&x)
    }
}

/// Checks shapes and builds the unified initialization.
pub fn init_federation(
    config: &ExperimentConfig,
    split: &SplitDataset,
    features: &ModalityFeatures,
) -> Result<FederationState> {
    config.validate()?;
    let m = split.num_items();
    if split.num_users() == 0 {
        return Err(Error::Config("dataset has no users".into()));
    }
    if split.test.len() != split.num_users() {
        return Err(Error::Config("every user needs a test item".into()));
    }
    if features.num_items() != m {
        return Err(Error::Config(format!(
            "features cover {} items but the dataset has {m}",
            features.num_items()
        )));
    }
    if config.top_k > m {
        return Err(Error::Config(format!("top_k {} exceeds catalog size {m}", config.top_k)));
    }
    let seed = config.seed;
    let shared = SharedParams::init(m, config.dim, config.hidden, derive_seed(seed, &[Stream::Init as u64, 0]))?;
    let clients = (0..split.num_users())
        .map(|u| {
            let items = split.train.items_of(u);
            if items.is_empty() {
                return Err(Error::Config(format!("user {u} has no training interactions")));
            }
            ClientState::with_init(u, &shared, items, config.user_init(), derive_seed(seed, &[Stream::Init as u64, 1, u as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    let g = config.effective_groups();
    let heads = if config.grouping == Grouping::MultipleAgg { g } else { 1 };
    let fusion = FusionModule::init(features, config.dim, config.group_dim, heads, derive_seed(seed, &[Stream::Init as u64, 2]))?;
    let eg = xavier_init(g, config.group_dim, derive_seed(seed, &[Stream::Init as u64, 3]))?;
    Ok(FederationState {
        shared,
        clients,
        groups: GroupState::new(split.num_users(), eg, fusion),
        lambda_history: Vec::new(),
        traces: Vec::new(),
        round: 0,
    })
}

/// One communication round; returns the new state and its trace.
pub fn run_round(
    state: FederationState,
    config: &ExperimentConfig,
    features: &ModalityFeatures,
) -> Result<(FederationState, RoundTrace)> {
    let FederationState {
        shared,
        mut clients,
        groups,
        mut lambda_history,
        mut traces,
        round,
    } = state;
    let t = round + 1;
    let seed = config.seed;
    let n = clients.len();
    let gfmfr = config.method == Method::Gfmfr;

    // (1) sample
    let sampled = sample_clients(n, config.sample_ratio, t, seed).map_err(|e| e.in_round(t, "sampling"))?;

    // (2) local training against last round's signals
    let lambda = if !gfmfr || t == 1 {
        0.0
    } else {
        let p = ScheduleParams {
            lambda_base: config.lambda_base,
            total_rounds: config.rounds,
            smoothing: config.smoothing,
            warmup: config.warmup,
        };
        lambda_schedule(config.schedule, t, &traces, &p).map_err(|e| e.in_round(t, "lambda schedule"))?
    };
    let signal_of = |u: usize| -> Option<&PreferenceSignal> {
        if gfmfr {
            groups.signal_for(u)
        } else {
            None
        }
    };
    if let Some(u) = sampled.iter().find(|&&u| signal_of(u).is_some() && groups.round >= t) {
        return Err(Error::ProtocolOrder(format!("client {u} saw a signal from round {}", groups.round)).in_round(t, "local training"));
    }
    let cfg = config.client_config();
    let started = Instant::now();
    let trained = sampled
        .par_iter()
        .map(|&u| {
            let s = derive_seed(seed, &[Stream::LocalTrain as u64, t as u64, u as u64]);
            local_train(&clients[u], &shared, signal_of(u), config.local_epochs, lambda, &cfg, s)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_round(t, "local training"))?;
    let train_time_ns = started.elapsed().as_nanos() as u64;

    let signal_receivers = sampled.iter().filter(|&&u| signal_of(u).is_some()).count();
    let mean_rec_loss = trained.iter().map(|(_, s)| s.mean_rec_loss).sum::<f64>() / trained.len() as f64;
    let dis: Vec<f64> = trained.iter().filter_map(|(_, s)| s.mean_dis_loss).collect();
    let mean_dis_loss = (!dis.is_empty()).then(|| dis.iter().sum::<f64>() / dis.len() as f64);
    let signal_source_round = (signal_receivers > 0).then_some(groups.round);

    // (3) private uploads
    let updates = trained
        .iter()
        .map(|(c, _)| make_update(c, config.ldp_delta, derive_seed(seed, &[Stream::Ldp as u64, t as u64, c.user_id as u64])))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_round(t, "upload"))?;
    for (c, _) in trained {
        let u = c.user_id;
        clients[u] = c;
    }

    // (4) aggregate
    let shared = aggregate(&updates).map_err(|e| e.in_round(t, "aggregation"))?;
    if !shared.is_finite() {
        return Err(Error::NumericFailure {
            param: "shared parameters".into(),
            detail: "non-finite after aggregation".into(),
        }
        .in_round(t, "aggregation"));
    }

    let mut trace = RoundTrace {
        round: t,
        sampled: sampled.clone(),
        mean_rec_loss,
        mean_dis_loss,
        lambda,
        signal_source_round,
        signal_receivers,
        train_time_ns,
        ..RoundTrace::default()
    };

    let groups = if gfmfr {
        let next = server_step(&groups, &updates, &sampled, &shared, config, features, t, &mut trace)?;
        for &u in &sampled {
            clients[u].group_id = next.assignments[u];
        }
        next
    } else {
        groups
    };
    trace.assignments = groups.assignments.clone();

    lambda_history.push(lambda);
    traces.push(trace.clone());
    Ok((
        FederationState {
            shared,
            clients,
            groups,
            lambda_history,
            traces,
            round: t,
        },
        trace,
    ))
}

/// Steps (5) and (6): grouping, pooling, fusion and signals.
#[allow(clippy::too_many_arguments)]
fn server_step(
    prev: &GroupState,
    updates: &[crate::client::ClientUpdate],
    sampled: &[usize],
    shared: &SharedParams,
    config: &ExperimentConfig,
    features: &ModalityFeatures,
    t: usize,
    trace: &mut RoundTrace,
) -> Result<GroupState> {
    let g = config.effective_groups();
    let seed = config.seed;
    let prev_labels: Vec<Option<usize>> = sampled.iter().map(|&u| prev.assignments[u]).collect();
    let labels: Vec<usize> = match config.grouping {
        Grouping::Single => vec![0; sampled.len()],
        Grouping::Random => {
            let mut rng = stream(seed, Stream::RandomGrouping, &[t as u64]);
            sampled.iter().map(|_| rng.random_range(0..g)).collect()
        }
        Grouping::KMeans | Grouping::MultipleAgg => {
            let preds: Vec<_> = updates.iter().map(|u| &u.predictor).collect();
            let has_prev = prev_labels.iter().any(Option::is_some);
            let out = cluster_clients(
                &preds,
                g,
                has_prev.then_some(&prev_labels[..]),
                &config.kmeans_params(),
                derive_seed(seed, &[Stream::Clustering as u64, t as u64]),
            )
            .map_err(|e| e.in_round(t, "clustering"))?;
            trace.groups_reduced = out.reduced;
            out.labels
        }
    };

    let mut assignments = prev.assignments.clone();
    let mut sizes = vec![0; g];
    for (&u, &l) in sampled.iter().zip(&labels) {
        assignments[u] = Some(l);
        sizes[l] += 1;
    }
    trace.group_sizes = sizes;
    trace.churn_eligible = prev_labels.iter().filter(|p| p.is_some()).count();
    trace.churn = prev_labels
        .iter()
        .zip(&labels)
        .filter(|(p, &l)| p.is_some_and(|p| p != l))
        .count();

    let prev_pooled = (!prev.pooled.is_empty()).then_some(&prev.pooled[..]);
    let prev_preds = (!prev.predictors.is_empty()).then_some(&prev.predictors[..]);
    let pooled = group_item_embedding(&assignments, updates, g, prev_pooled, &shared.item_embeddings)
        .map_err(|e| e.in_round(t, "group pooling"))?;
    let predictors = group_pred_fn(&assignments, updates, g, prev_preds, &shared.predictor)
        .map_err(|e| e.in_round(t, "group pooling"))?;

    let trained = train_aggregation_module(
        &prev.fusion,
        &prev.group_embeddings,
        features,
        &pooled,
        config.fusion_steps,
        config.fusion_lr,
    )
    .map_err(|e| e.in_round(t, "fusion training"))?;
    trace.agg_loss_initial = trained.losses.first().copied();
    trace.agg_loss_final = trained.losses.last().copied();

    let per_group = (0..g)
        .into_par_iter()
        .map(|l| {
            let f = fuse(&trained.module, &trained.group_embeddings, l, features)?;
            let s = map_preference(&predictors[l], &f.features)?;
            Ok((f, s))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_round(t, "preference signal"))?;
    let (fused, signals): (Vec<_>, Vec<_>) = per_group.into_iter().unzip();
    let attention: Vec<Vec<f64>> = fused.iter().map(|f| f.weights.clone()).collect();
    trace.attention = attention.clone();

    Ok(GroupState {
        assignments,
        group_embeddings: trained.group_embeddings,
        fusion: trained.module,
        pooled,
        fused: fused.into_iter().map(|f| f.features).collect::<Vec<Matrix>>(),
        attention,
        predictors,
        signals,
        agg_losses: trained.losses,
        round: t,
    })
}

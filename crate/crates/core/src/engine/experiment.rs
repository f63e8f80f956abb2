use crate::dataio::{ModalityFeatures, SplitDataset};
use crate::engine::{init_federation, run_round, EvalModel, ExperimentConfig, FederationState, RoundTrace, SharedView};
use crate::error::Result;
use crate::evalreport::{account_efficiency, evaluate_all, EfficiencyLedger, MetricsReport, MetricsRow};

/// Result of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub metrics: MetricsReport,
    pub traces: Vec<RoundTrace>,
    pub efficiency: EfficiencyLedger,
    pub state: FederationState,
}

impl ExperimentReport {
    pub fn final_hr(&self) -> f64 {
        self.metrics.last().map_or(0.0, |r| r.hr_at_k)
    }

    pub fn final_ndcg(&self) -> f64 {
        self.metrics.last().map_or(0.0, |r| r.ndcg_at_k)
    }
}

/// Scores every user under the configured evaluation model.
pub fn evaluate_state(state: &FederationState, config: &ExperimentConfig, split: &SplitDataset) -> Result<MetricsRow> {
    let mut row = match config.eval_model {
        EvalModel::Local => evaluate_all(&state.clients, split, config.top_k, config.exclude_train)?,
        EvalModel::Shared => {
            let views: Vec<SharedView> = state
                .clients
                .iter()
                .map(|c| SharedView {
                    user_embedding: &c.user_embedding,
                    shared: &state.shared,
                })
                .collect();
            evaluate_all(&views, split, config.top_k, config.exclude_train)?
        }
    };
    row.round = state.round;
    Ok(row)
}

/// Initializes, runs `config.rounds` rounds and evaluates every
/// `eval_every` rounds and after the last one.
pub fn run_experiment(config: &ExperimentConfig, split: &SplitDataset, features: &ModalityFeatures) -> Result<ExperimentReport> {
    run_experiment_with(config, split, features, |_, _| Ok(()))
}

/// As [`run_experiment`], calling `on_round` after each round.
pub fn run_experiment_with<F>(
    config: &ExperimentConfig,
    split: &SplitDataset,
    features: &ModalityFeatures,
    mut on_round: F,
) -> Result<ExperimentReport>
where
    F: FnMut(&FederationState, &RoundTrace) -> Result<()>,
{
    let mut state = init_federation(config, split, features)?;
    let mut metrics = MetricsReport {
        k: config.top_k,
        rows: Vec::new(),
    };
    for t in 1..=config.rounds {
        let (next, trace) = run_round(state, config, features)?;
        state = next;
        if t % config.eval_every == 0 || t == config.rounds {
            metrics.rows.push(evaluate_state(&state, config, split)?);
        }
        on_round(&state, &trace)?;
    }
    let dims: Vec<usize> = (0..features.num_modalities()).map(|m| features.dim(m)).collect();
    let efficiency = account_efficiency(config, split.num_items(), &dims, &state.traces);
    Ok(ExperimentReport {
        metrics,
        traces: state.traces.clone(),
        efficiency,
        state,
    })
}

use rand::seq::SliceRandom;

use crate::client::loss::{dis_loss, dis_loss_value, rec_loss, KlDirection};
use crate::client::{ClientState, PreferenceSignal, SharedParams};
use crate::dataio::{candidate_items, sample_from_candidates};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamState};
use crate::rng::rng_from_seed;

/// Which items the distillation term is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistillScope {
    /// The current minibatch (positives and sampled negatives).
    #[default]
    Batch,
    /// Every item in the catalog.
    Catalog,
}

/// Client-side training knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub lr: f64,
    /// Negatives sampled per positive.
    pub n_neg: usize,
    /// Positives per minibatch; 0 means all positives in one batch.
    pub batch_size: usize,
    pub kl_direction: KlDirection,
    pub distill_scope: DistillScope,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            n_neg: 4,
            batch_size: 0,
            kl_direction: KlDirection::GroupToLocal,
            distill_scope: DistillScope::Batch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalTrainStats {
    /// Mean recommendation loss over minibatches, measured before each step.
    pub mean_rec_loss: f64,
    /// Mean distillation loss, when a signal was available.
    pub mean_dis_loss: Option<f64>,
    pub steps: usize,
}

/// Syncs `state` from `shared`, then runs `epochs` of Adam on
/// `rec + lambda * dis`. The distillation term is only active when a signal
/// is supplied and `lambda > 0`; its value is still recorded whenever a
/// signal is present.
pub fn local_train(
    state: &ClientState,
    shared: &SharedParams,
    signal: Option<&PreferenceSignal>,
    epochs: usize,
    lambda: f64,
    cfg: &ClientConfig,
    seed: u64,
) -> Result<(ClientState, LocalTrainStats)> {
    if epochs == 0 {
        return Err(Error::invalid("local_train needs at least one epoch"));
    }
    if shared.num_items() != state.item_embeddings.rows() || shared.dim() != state.dim() {
        return Err(Error::invalid("shared parameters do not match client shapes"));
    }
    if state.train_items.is_empty() {
        return Err(Error::invalid(format!("client {} has no training data", state.user_id)));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    // A signal is only meaningful for a grouped client.
    let signal = signal.filter(|_| state.group_id.is_some());

    let mut local = state.clone();
    local.sync(shared);
    let mut rng = rng_from_seed(seed);
    let candidates = candidate_items(local.item_embeddings.rows(), &local.train_items);
    let catalog: Vec<usize> = match cfg.distill_scope {
        DistillScope::Catalog => (0..local.item_embeddings.rows()).collect(),
        DistillScope::Batch => Vec::new(),
    };

    let mut params = local.to_param_set();
    let mut adam = AdamState::new(&params);
    let mut positives = local.train_items.clone();
    let batch = if cfg.batch_size == 0 { positives.len() } else { cfg.batch_size };

    let (mut rec_sum, mut dis_sum, mut steps) = (0.0, 0.0, 0usize);
    for _ in 0..epochs {
        if batch < positives.len() {
            positives.shuffle(&mut rng);
        }
        for chunk in positives.chunks(batch) {
            let negatives = sample_from_candidates(&candidates, cfg.n_neg * chunk.len(), &mut rng).items;
            let mut step = rec_loss(&local, chunk, &negatives)?;
            rec_sum += step.loss;

            if let Some(sig) = signal {
                let scope: Vec<usize> = match cfg.distill_scope {
                    DistillScope::Batch => chunk.iter().chain(&negatives).copied().collect(),
                    DistillScope::Catalog => catalog.clone(),
                };
                if lambda > 0.0 {
                    let dis = dis_loss(&local, sig, &scope, cfg.kl_direction)?;
                    dis_sum += dis.loss;
                    step.grads.axpy(lambda, &dis.grads);
                } else {
                    dis_sum += dis_loss_value(&local, sig, &scope, cfg.kl_direction)?;
                }
            }

            adam_step(&mut params, &step.grads.to_param_set(), &mut adam, cfg.lr)?;
            local.load_param_set(&params);
            steps += 1;
        }
    }

    if !params.is_finite() {
        return Err(Error::NumericFailure {
            param: format!("client {}", state.user_id),
            detail: "non-finite parameters after local training".into(),
        });
    }
    Ok((
        local,
        LocalTrainStats {
            mean_rec_loss: rec_sum / steps as f64,
            mean_dis_loss: signal.map(|_| dis_sum / steps as f64),
            steps,
        },
    ))
}

use crate::client::{Backbone, ClientState, PredictorParams, PreferenceSignal};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamSet};

const BCE_CLAMP: f64 = 1e-12;
const KL_CLAMP: f64 = 1e-9;

/// Which way the distillation KL divergence points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlDirection {
    /// `KL(group signal || local prediction)`: the group acts as teacher.
    #[default]
    GroupToLocal,
    /// `KL(local prediction || group signal)`.
    LocalToGroup,
}

/// Gradients for every trainable client parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientGrads {
    pub user_embedding: Vec<f64>,
    /// Dense `M x d`; rows of untouched items stay zero.
    pub item_embeddings: Matrix,
    pub predictor: PredictorParams,
}

impl ClientGrads {
    pub fn zeros_for(state: &ClientState) -> Self {
        let (m, d) = state.item_embeddings.shape();
        Self {
            user_embedding: vec![0.0; d],
            item_embeddings: Matrix::zeros(m, d),
            predictor: PredictorParams::zeros(d, state.predictor.hidden_dim()),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.user_embedding.iter_mut().for_each(|x| *x *= alpha);
        self.item_embeddings.scale(alpha);
        self.predictor.scale(alpha);
    }

    pub fn axpy(&mut self, alpha: f64, other: &ClientGrads) {
        for (a, b) in self.user_embedding.iter_mut().zip(&other.user_embedding) {
            *a += alpha * b;
        }
        self.item_embeddings.axpy(alpha, &other.item_embeddings);
        self.predictor.axpy(alpha, &other.predictor);
    }

    /// Same layout as [`ClientState::to_param_set`].
    pub fn to_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new()
            .with(super::state::USER, Matrix::row_vector(&self.user_embedding))
            .with(super::state::ITEMS, self.item_embeddings.clone());
        self.predictor.push_into(&mut set);
        set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrads {
    pub loss: f64,
    pub grads: ClientGrads,
}

/// Backprops `dlogit` for `item` through the predictor into all grads.
fn backprop_item(state: &ClientState, item: usize, dlogit: f64, x: &[f64], cache: &super::predictor::ForwardCache, g: &mut ClientGrads) {
    let dx = state.predictor.backward(x, cache, dlogit, &mut g.predictor);
    let e = state.item_embeddings.row(item);
    for (k, &dxk) in dx.iter().enumerate() {
        g.user_embedding[k] += dxk * e[k];
    }
    let u = &state.user_embedding;
    for (k, ge) in g.item_embeddings.row_mut(item).iter_mut().enumerate() {
        *ge += dx[k] * u[k];
    }
}

/// Mean binary cross-entropy over positives (label 1) and negatives (label 0).
pub fn rec_loss(state: &ClientState, positives: &[usize], negatives: &[usize]) -> Result<LossAndGrads> {
    let n = positives.len() + negatives.len();
    if n == 0 {
        return Err(Error::invalid("rec_loss needs a non-empty batch"));
    }
    let mut grads = ClientGrads::zeros_for(state);
    let mut total = 0.0;
    let labelled = positives.iter().map(|&i| (i, 1.0)).chain(negatives.iter().map(|&i| (i, 0.0)));
    for (item, label) in labelled {
        let x = state.input_for(item);
        let cache = state.predictor.forward_cached(&x);
        let p = cache.prob.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        total -= label * p.ln() + (1.0 - label) * (1.0 - p).ln();
        backprop_item(state, item, (cache.prob - label) / n as f64, &x, &cache, &mut grads);
    }
    Ok(LossAndGrads {
        loss: total / n as f64,
        grads,
    })
}

/// Two-point KL divergence, both distributions clamped to `[1e-9, 1 - 1e-9]`.
pub fn binary_kl(teacher: f64, student: f64) -> f64 {
    let q = teacher.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    let p = student.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    (q * (q / p).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln()).max(0.0)
}

fn require_group(state: &ClientState) -> Result<()> {
    if state.group_id.is_none() {
        return Err(Error::ProtocolOrder(format!(
            "client {} has no group assignment yet",
            state.user_id
        )));
    }
    Ok(())
}

/// Mean distillation divergence over `batch` between the group signal and
/// the local predictions.
pub fn dis_loss(
    state: &ClientState,
    signal: &PreferenceSignal,
    batch: &[usize],
    direction: KlDirection,
) -> Result<LossAndGrads> {
    require_group(state)?;
    if batch.is_empty() {
        return Err(Error::invalid("dis_loss needs a non-empty batch"));
    }
    let n = batch.len() as f64;
    let mut grads = ClientGrads::zeros_for(state);
    let mut total = 0.0;
    for &item in batch {
        let x = state.input_for(item);
        let cache = state.predictor.forward_cached(&x);
        let q = signal.p_interact(item).clamp(KL_CLAMP, 1.0 - KL_CLAMP);
        let raw = cache.prob;
        let p = raw.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
        let dlogit = if raw != p {
            0.0
        } else {
            match direction {
                KlDirection::GroupToLocal => p - q,
                KlDirection::LocalToGroup => {
                    let logit = |v: f64| (v / (1.0 - v)).ln();
                    p * (1.0 - p) * (logit(p) - logit(q))
                }
            }
        };
        total += match direction {
            KlDirection::GroupToLocal => binary_kl(q, p),
            KlDirection::LocalToGroup => binary_kl(p, q),
        };
        if dlogit != 0.0 {
            backprop_item(state, item, dlogit / n, &x, &cache, &mut grads);
        }
    }
    Ok(LossAndGrads {
        loss: total / n,
        grads,
    })
}

/// Loss value of [`dis_loss`] without gradients.
pub fn dis_loss_value(
    state: &ClientState,
    signal: &PreferenceSignal,
    batch: &[usize],
    direction: KlDirection,
) -> Result<f64> {
    require_group(state)?;
    if batch.is_empty() {
        return Err(Error::invalid("dis_loss needs a non-empty batch"));
    }
    let total: f64 = batch
        .iter()
        .map(|&item| {
            let p = state.predict(item);
            let q = signal.p_interact(item);
            match direction {
                KlDirection::GroupToLocal => binary_kl(q, p),
                KlDirection::LocalToGroup => binary_kl(p, q),
            }
        })
        .sum();
    Ok(total / batch.len() as f64)
}

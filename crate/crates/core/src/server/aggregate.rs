use crate::client::{ClientUpdate, PredictorParams, SharedParams};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Indices of `updates` sorted by user id, rejecting duplicates.
pub(crate) fn user_order(updates: &[ClientUpdate]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..updates.len()).collect();
    order.sort_by_key(|&i| updates[i].user_id);
    for w in order.windows(2) {
        if updates[w[0]].user_id == updates[w[1]].user_id {
            return Err(Error::Protocol {
                client: updates[w[0]].user_id,
                detail: "duplicate update in one round".into(),
            });
        }
    }
    Ok(order)
}

pub(crate) fn check_shapes(reference: &ClientUpdate, u: &ClientUpdate) -> Result<()> {
    if u.item_embeddings.shape() != reference.item_embeddings.shape()
        || !u.predictor.same_shape(&reference.predictor)
    {
        return Err(Error::Protocol {
            client: u.user_id,
            detail: format!(
                "update shape {:?} does not match {:?}",
                u.item_embeddings.shape(),
                reference.item_embeddings.shape()
            ),
        });
    }
    Ok(())
}

/// Aggregation weights `n_u / sum n_v`, in the order of `updates`.
pub fn aggregation_weights(updates: &[ClientUpdate]) -> Result<Vec<f64>> {
    let total: usize = updates.iter().map(|u| u.sample_count).sum();
    if total == 0 {
        return Err(Error::invalid("aggregation needs a positive total sample count"));
    }
    Ok(updates
        .iter()
        .map(|u| u.sample_count as f64 / total as f64)
        .collect())
}

/// Weighted mean of uploaded shared parameters with weights proportional to
/// each client's data volume. Summation runs in ascending user id order, so
/// the result does not depend on the order of `updates`.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<SharedParams> {
    let first = updates
        .first()
        .ok_or_else(|| Error::invalid("aggregate needs at least one update"))?;
    for u in updates {
        check_shapes(first, u)?;
    }
    let order = user_order(updates)?;
    let weights = aggregation_weights(updates)?;

    let (m, d) = first.item_embeddings.shape();
    let mut items = Matrix::zeros(m, d);
    let mut predictor = PredictorParams::zeros(d, first.predictor.hidden_dim());
    for &i in &order {
        items.axpy(weights[i], &updates[i].item_embeddings);
        predictor.axpy(weights[i], &updates[i].predictor);
    }
    Ok(SharedParams {
        item_embeddings: items,
        predictor,
    })
}

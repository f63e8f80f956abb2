use crate::client::{ClientUpdate, PredictorParams};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::server::aggregate::{check_shapes, user_order};

/// Members of each group among `updates`, as indices in ascending user id.
fn members(assignments: &[Option<usize>], updates: &[ClientUpdate], g: usize) -> Result<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); g];
    for i in user_order(updates)? {
        let u = &updates[i];
        check_shapes(&updates[0], u)?;
        let l = assignments
            .get(u.user_id)
            .copied()
            .flatten()
            .ok_or_else(|| Error::ProtocolOrder(format!("client {} has no group", u.user_id)))?;
        if l >= g {
            return Err(Error::invalid(format!("client {} assigned to group {l} >= {g}", u.user_id)));
        }
        groups[l].push(i);
    }
    Ok(groups)
}

/// Unweighted mean of members' uploaded item tables per group. Groups with no
/// member this round fall back to `previous[l]`, else to `global`.
pub fn group_item_embedding(
    assignments: &[Option<usize>],
    updates: &[ClientUpdate],
    g: usize,
    previous: Option<&[Matrix]>,
    global: &Matrix,
) -> Result<Vec<Matrix>> {
    let groups = members(assignments, updates, g)?;
    Ok(groups
        .iter()
        .enumerate()
        .map(|(l, idx)| {
            if idx.is_empty() {
                return previous
                    .and_then(|p| p.get(l))
                    .cloned()
                    .unwrap_or_else(|| global.clone());
            }
            let mut acc = Matrix::zeros(global.rows(), global.cols());
            for &i in idx {
                acc.axpy(1.0, &updates[i].item_embeddings);
            }
            acc.scale(1.0 / idx.len() as f64);
            acc
        })
        .collect())
}

/// Field-wise mean of members' predictors per group, with the same fallback
/// rule as [`group_item_embedding`].
pub fn group_pred_fn(
    assignments: &[Option<usize>],
    updates: &[ClientUpdate],
    g: usize,
    previous: Option<&[PredictorParams]>,
    global: &PredictorParams,
) -> Result<Vec<PredictorParams>> {
    let groups = members(assignments, updates, g)?;
    Ok(groups
        .iter()
        .enumerate()
        .map(|(l, idx)| {
            if idx.is_empty() {
                return previous
                    .and_then(|p| p.get(l))
                    .cloned()
                    .unwrap_or_else(|| global.clone());
            }
            let mut acc = PredictorParams::zeros(global.input_dim(), global.hidden_dim());
            for &i in idx {
                acc.axpy(1.0, &updates[i].predictor);
            }
            acc.scale(1.0 / idx.len() as f64);
            acc
        })
        .collect())
}

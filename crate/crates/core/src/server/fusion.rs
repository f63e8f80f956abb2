//! Group-conditioned multimodal aggregation.
//!
//! Each modality is projected into the item-embedding space by a learned
//! `d1 x d` map. A group's embedding selects softmax weights over modalities
//! through an attention map `A` (`k x d2`), and the fused item table is the
//! weighted sum of the projections. The module is fitted so that each group's
//! fused table matches that group's pooled item embeddings.

use crate::dataio::ModalityFeatures;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, softmax, xavier_init, AdamState, Matrix, ParamSet};

/// Projections and attention map for one aggregation head.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionHead {
    /// Per modality, `d1_m x d`.
    pub projections: Vec<Matrix>,
    /// `k x d2`
    pub attention: Matrix,
}

/// One shared head, or one head per group.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModule {
    pub heads: Vec<FusionHead>,
}

impl FusionModule {
    /// `heads = 1` shares parameters across groups; `heads = g` gives each
    /// group its own copy.
    pub fn init(features: &ModalityFeatures, d: usize, d2: usize, heads: usize, seed: u64) -> Result<Self> {
        let k = features.num_modalities();
        let heads = (0..heads)
            .map(|h| {
                let base = seed.wrapping_add(1000 * h as u64);
                Ok(FusionHead {
                    projections: (0..k)
                        .map(|m| xavier_init(features.dim(m), d, base.wrapping_add(m as u64)))
                        .collect::<Result<_>>()?,
                    attention: xavier_init(k, d2, base.wrapping_add(999))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { heads })
    }

    pub fn head_for(&self, group: usize) -> usize {
        if self.heads.len() == 1 {
            0
        } else {
            group
        }
    }

    pub fn to_param_set(&self, group_embeddings: &Matrix) -> ParamSet {
        let mut set = ParamSet::new();
        for (h, head) in self.heads.iter().enumerate() {
            for (m, w) in head.projections.iter().enumerate() {
                set.push(format!("head{h}.proj{m}"), w.clone()).expect("unique");
            }
            set.push(format!("head{h}.attention"), head.attention.clone()).expect("unique");
        }
        set.push("group_embeddings", group_embeddings.clone()).expect("unique");
        set
    }

    pub fn from_param_set(&self, set: &ParamSet) -> (FusionModule, Matrix) {
        let mut tensors = set.tensors();
        let heads = self
            .heads
            .iter()
            .map(|head| FusionHead {
                projections: head
                    .projections
                    .iter()
                    .map(|_| tensors.next().expect("projection").clone())
                    .collect(),
                attention: tensors.next().expect("attention").clone(),
            })
            .collect();
        let eg = tensors.next().expect("group embeddings").clone();
        (FusionModule { heads }, eg)
    }
}

/// Fused table for one group plus the modality weights that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub features: Matrix,
    pub weights: Vec<f64>,
}

fn check_shapes(module: &FusionModule, eg: &Matrix, group: usize, features: &ModalityFeatures) -> Result<()> {
    let head = module
        .heads
        .get(module.head_for(group))
        .ok_or_else(|| Error::invalid(format!("no fusion head for group {group}")))?;
    if group >= eg.rows() {
        return Err(Error::invalid(format!("group {group} has no embedding")));
    }
    if head.projections.len() != features.num_modalities()
        || head.attention.rows() != features.num_modalities()
        || head.attention.cols() != eg.cols()
    {
        return Err(Error::invalid("fusion parameters do not match modality count or d2"));
    }
    for (m, w) in head.projections.iter().enumerate() {
        if w.rows() != features.dim(m) {
            return Err(Error::invalid(format!("projection {m} expects width {}", w.rows())));
        }
    }
    Ok(())
}

/// `Q_l = sum_m softmax(A e_l)_m * (E_m W_m)`.
pub fn fuse(module: &FusionModule, group_embeddings: &Matrix, group: usize, features: &ModalityFeatures) -> Result<Fused> {
    check_shapes(module, group_embeddings, group, features)?;
    let head = &module.heads[module.head_for(group)];
    let weights = softmax(&head.attention.mat_vec(group_embeddings.row(group)));
    let d = head.projections[0].cols();
    let mut out = Matrix::zeros(features.num_items(), d);
    for (m, (e, w)) in features.iter().zip(&head.projections).enumerate() {
        out.axpy(weights[m], &e.matmul(w));
    }
    Ok(Fused { features: out, weights })
}

/// Mean over groups of the per-entry MSE between fused and pooled tables,
/// with gradients laid out like [`FusionModule::to_param_set`].
pub fn agg_loss(
    module: &FusionModule,
    group_embeddings: &Matrix,
    features: &ModalityFeatures,
    targets: &[Matrix],
) -> Result<(f64, ParamSet)> {
    let g = targets.len();
    if g == 0 {
        return Err(Error::invalid("no group targets"));
    }
    for l in 0..g {
        check_shapes(module, group_embeddings, l, features)?;
    }
    let k = features.num_modalities();
    let d = module.heads[0].projections[0].cols();
    let m_items = features.num_items();
    if targets.iter().any(|t| t.shape() != (m_items, d)) {
        return Err(Error::invalid("group targets must be M x d"));
    }
    let scale = 2.0 / (g * m_items * d) as f64;

    let mut grad_proj: Vec<Vec<Matrix>> = module
        .heads
        .iter()
        .map(|h| h.projections.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect())
        .collect();
    let mut grad_att: Vec<Matrix> = module
        .heads
        .iter()
        .map(|h| Matrix::zeros(h.attention.rows(), h.attention.cols()))
        .collect();
    let mut grad_eg = Matrix::zeros(group_embeddings.rows(), group_embeddings.cols());

    // Projections per head, computed once and reused by every group on it.
    let projected: Vec<Vec<Matrix>> = module
        .heads
        .iter()
        .map(|h| features.iter().zip(&h.projections).map(|(e, w)| e.matmul(w)).collect())
        .collect();
    // Per head and modality: sum over groups of weight * dL/dQ.
    let mut back: Vec<Vec<Matrix>> = module
        .heads
        .iter()
        .map(|_| (0..k).map(|_| Matrix::zeros(m_items, d)).collect())
        .collect();

    let mut loss = 0.0;
    for (l, target) in targets.iter().enumerate() {
        let h = module.head_for(l);
        let head = &module.heads[h];
        let e_l = group_embeddings.row(l);
        let a = softmax(&head.attention.mat_vec(e_l));
        let mut resid = Matrix::zeros(m_items, d);
        for (m, p) in projected[h].iter().enumerate() {
            resid.axpy(a[m], p);
        }
        resid.axpy(-1.0, target);
        loss += resid.frobenius_dot(&resid) / (m_items * d) as f64;
        resid.scale(scale);

        let ga: Vec<f64> = projected[h].iter().map(|p| resid.frobenius_dot(p)).collect();
        let mean: f64 = a.iter().zip(&ga).map(|(x, y)| x * y).sum();
        let dz: Vec<f64> = a.iter().zip(&ga).map(|(x, y)| x * (y - mean)).collect();
        for (m, &dzm) in dz.iter().enumerate() {
            for (ga, &e) in grad_att[h].row_mut(m).iter_mut().zip(e_l) {
                *ga += dzm * e;
            }
            back[h][m].axpy(a[m], &resid);
        }
        let de = head.attention.vec_mat(&dz);
        for (g, v) in grad_eg.row_mut(l).iter_mut().zip(de) {
            *g += v;
        }
    }
    for (h, per_mod) in back.iter().enumerate() {
        for (m, b) in per_mod.iter().enumerate() {
            grad_proj[h][m] = features.modality(m).t_matmul(b);
        }
    }
    loss /= g as f64;

    let mut grads = ParamSet::new();
    for (h, (gp, ga)) in grad_proj.into_iter().zip(grad_att).enumerate() {
        for (m, w) in gp.into_iter().enumerate() {
            grads.push(format!("head{h}.proj{m}"), w).expect("unique");
        }
        grads.push(format!("head{h}.attention"), ga).expect("unique");
    }
    grads.push("group_embeddings", grad_eg).expect("unique");
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggTraining {
    pub module: FusionModule,
    pub group_embeddings: Matrix,
    /// Loss before each step, then the loss after the final step.
    pub losses: Vec<f64>,
}

/// Fits the module and group embeddings to `targets` with `steps` Adam steps.
pub fn train_aggregation_module(
    module: &FusionModule,
    group_embeddings: &Matrix,
    features: &ModalityFeatures,
    targets: &[Matrix],
    steps: usize,
    lr: f64,
) -> Result<AggTraining> {
    if steps == 0 {
        return Err(Error::invalid("fusion training needs at least one step"));
    }
    let mut params = module.to_param_set(group_embeddings);
    let mut adam = AdamState::new(&params);
    let mut current = (module.clone(), group_embeddings.clone());
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let (loss, grads) = agg_loss(&current.0, &current.1, features, targets)?;
        if !loss.is_finite() {
            return Err(Error::NumericFailure {
                param: "aggregation module".into(),
                detail: format!("non-finite loss at step {step}"),
            });
        }
        losses.push(loss);
        if step == steps {
            break;
        }
        adam_step(&mut params, &grads, &mut adam, lr)?;
        current = module.from_param_set(&params);
    }
    Ok(AggTraining {
        module: current.0,
        group_embeddings: current.1,
        losses,
    })
}

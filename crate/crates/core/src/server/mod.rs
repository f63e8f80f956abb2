//! Server-side protocol: weighted aggregation, clustering clients by their
//! predictors, group pooling, multimodal fusion and group preference signals.

mod aggregate;
mod cluster;
mod fusion;
mod pooling;
mod preference;

use std::io::Write;

pub use crate::client::SharedParams;
pub use aggregate::{aggregate, aggregation_weights};
pub use cluster::{align_labels, cluster_clients, kmeans, ClusterOutcome, KMeansFit, KMeansParams};
pub use fusion::{agg_loss, fuse, train_aggregation_module, AggTraining, Fused, FusionHead, FusionModule};
pub use pooling::{group_item_embedding, group_pred_fn};
pub use preference::map_preference;

use crate::client::{PredictorParams, PreferenceSignal};
use crate::numerics::Matrix;

/// Everything the server keeps about groups after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    /// Indexed by user id; `None` until a client is first clustered.
    pub assignments: Vec<Option<usize>>,
    /// `g x d2`
    pub group_embeddings: Matrix,
    pub fusion: FusionModule,
    pub pooled: Vec<Matrix>,
    pub fused: Vec<Matrix>,
    /// Modality weights per group.
    pub attention: Vec<Vec<f64>>,
    pub predictors: Vec<PredictorParams>,
    pub signals: Vec<PreferenceSignal>,
    pub agg_losses: Vec<f64>,
    /// Round whose server step produced the signals; 0 before any round.
    pub round: usize,
}

impl GroupState {
    pub fn new(num_users: usize, group_embeddings: Matrix, fusion: FusionModule) -> Self {
        Self {
            assignments: vec![None; num_users],
            group_embeddings,
            fusion,
            pooled: Vec::new(),
            fused: Vec::new(),
            attention: Vec::new(),
            predictors: Vec::new(),
            signals: Vec::new(),
            agg_losses: Vec::new(),
            round: 0,
        }
    }

    /// Signal for `user`'s current group, if both exist.
    pub fn signal_for(&self, user: usize) -> Option<&PreferenceSignal> {
        let l = self.assignments.get(user).copied().flatten()?;
        self.signals.get(l)
    }

    pub fn num_groups(&self) -> usize {
        self.group_embeddings.rows()
    }

    /// Writes assignments, attention weights and the fusion loss trajectory as
    /// `kind,key,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,key,value")?;
        for (u, g) in self.assignments.iter().enumerate() {
            if let Some(g) = g {
                writeln!(w, "assignment,{u},{g}")?;
            }
        }
        for (l, a) in self.attention.iter().enumerate() {
            for (m, x) in a.iter().enumerate() {
                writeln!(w, "attention,{l}:{m},{x}")?;
            }
        }
        for (s, x) in self.agg_losses.iter().enumerate() {
            writeln!(w, "agg_loss,{s},{x}")?;
        }
        Ok(())
    }
}

//! Federated recommendation with group-wise multimodal fusion.
//!
//! Clients train a backbone recommender on private interactions and upload
//! the shared parts (item embeddings, predictor). The server aggregates them,
//! clusters clients by predictor parameters, learns one fused multimodal item
//! representation per group, maps it through the group's averaged predictor
//! into a 2-dimensional preference signal, and broadcasts the signal for
//! distillation in the next round.

pub mod client;
pub mod dataio;
pub mod engine;
pub mod error;
pub mod evalreport;
pub mod numerics;
pub mod rng;
pub mod server;

pub use client::{ClientState, ClientUpdate, PredictorParams, PreferenceSignal, SharedParams};
pub use dataio::{InteractionStore, ModalityFeatures, SplitDataset};
pub use engine::{ExperimentConfig, FederationState, RoundTrace};
pub use error::{Error, Result};
pub use evalreport::{EfficiencyLedger, MetricsReport};
pub use numerics::{Matrix, ParamSet};

//! Interaction logs, modality features, leave-one-out splits, negative
//! sampling, and planted-group synthetic data.

mod features;
mod interactions;
mod split;
mod synth;

pub use features::{
    load_modality_features, parse_modality_features, read_feature_header,
    write_modality_features, FeatureHeader, ModalityFeatures, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use interactions::{
    load_interactions, load_interactions_with_catalog, write_interactions, IdMap,
    InteractionStore, LoadedInteractions,
};
pub use split::{
    candidate_items, leave_one_out_split, sample_from_candidates, sample_negatives,
    NegativeSample, SplitDataset,
};
pub use synth::{generate_synthetic, SyntheticData, SyntheticSpec};

//! One simulated client: a backbone with a private user embedding and
//! shared item embeddings and predictor, local training with preference
//! distillation, and locally-private uploads.

mod ldp;
mod loss;
mod predictor;
mod state;
mod train;

pub use ldp::{make_update, privacy_budget, sample_laplace, LDP_CLAMP};
pub use loss::{binary_kl, dis_loss, dis_loss_value, rec_loss, ClientGrads, KlDirection, LossAndGrads};
pub use predictor::PredictorParams;
pub use state::{predict, Backbone, ClientState, ClientUpdate, PreferenceSignal, SharedParams, UserInit};
pub use train::{local_train, ClientConfig, DistillScope, LocalTrainStats};

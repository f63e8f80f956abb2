//! Ranking metrics, full-catalog evaluation and storage/communication
//! accounting.

mod efficiency;
mod metrics;

pub use efficiency::{account_efficiency, EfficiencyLedger, RoundBytes};
pub use metrics::{evaluate_all, hr_at_k, ndcg_at_k, rank_from_scores, rank_of_test_item, MetricsReport, MetricsRow};

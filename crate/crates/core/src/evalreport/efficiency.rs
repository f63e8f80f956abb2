use crate::client::{ClientUpdate, PreferenceSignal};
use crate::engine::{ExperimentConfig, Method, RoundTrace};

/// Bytes moved per round, from declared 32-bit wire sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundBytes {
    pub round: usize,
    pub sampled: usize,
    pub upload_bytes: usize,
    pub download_bytes: usize,
}

/// Storage and communication accounting for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyLedger {
    /// Private user embedding, local shared copies and the group signal.
    pub client_storage_bytes: usize,
    pub upload_bytes_per_client: usize,
    /// Shared parameters plus the group signal when one is in use.
    pub download_bytes_per_client: usize,
    pub signal_bytes: usize,
    /// Unified initialization sent to every client once.
    pub initial_broadcast_bytes: usize,
    /// What broadcasting every modality matrix to each client would cost.
    pub client_side_fusion_broadcast_bytes: usize,
    pub rounds: Vec<RoundBytes>,
    /// Wall time of the client training step per round.
    pub client_train_time_ns: Vec<u64>,
}

impl EfficiencyLedger {
    pub fn median_train_time_ns(&self) -> u64 {
        let mut t = self.client_train_time_ns.clone();
        t.sort_unstable();
        match t.len() {
            0 => 0,
            n if n % 2 == 1 => t[n / 2],
            n => (t[n / 2 - 1] + t[n / 2]) / 2,
        }
    }
}

/// Builds the ledger for a finished run over `num_items` items with the
/// given modality widths.
pub fn account_efficiency(
    config: &ExperimentConfig,
    num_items: usize,
    modality_dims: &[usize],
    traces: &[RoundTrace],
) -> EfficiencyLedger {
    let (d, h) = (config.dim, config.hidden);
    let payload = ClientUpdate::payload_bytes(num_items, d, h);
    let signal_bytes = match config.method {
        Method::Gfmfr => num_items * PreferenceSignal::WIRE_BYTES_PER_ITEM,
        Method::Backbone => 0,
    };
    let rounds = traces
        .iter()
        .map(|t| RoundBytes {
            round: t.round,
            sampled: t.sampled.len(),
            upload_bytes: t.sampled.len() * payload,
            download_bytes: t.sampled.len() * payload + t.signal_receivers * signal_bytes,
        })
        .collect();
    EfficiencyLedger {
        client_storage_bytes: 4 * d + payload + signal_bytes,
        upload_bytes_per_client: payload,
        download_bytes_per_client: payload + signal_bytes,
        signal_bytes,
        initial_broadcast_bytes: payload,
        client_side_fusion_broadcast_bytes: modality_dims.iter().map(|d1| num_items * d1 * 4).sum(),
        rounds,
        client_train_time_ns: traces.iter().map(|t| t.train_time_ns).collect(),
    }
}

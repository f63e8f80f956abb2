//! The federated round loop: sampling, local training, private uploads,
//! aggregation, grouping, fusion and signal broadcast, with λ scheduling.

mod config;
mod experiment;
pub mod output;
mod round;
mod schedule;

pub use config::{EvalModel, ExperimentConfig, Grouping, KlDir, Method, Schedule, Scope, UserInitKind, CONFIG_VERSION};
pub use experiment::{evaluate_state, run_experiment, run_experiment_with, ExperimentReport};
pub use round::{init_federation, run_round, FederationState, RoundTrace, SharedView};
pub use schedule::{lambda_schedule, sample_clients, ScheduleParams};

#[cfg(test)]
mod tests;

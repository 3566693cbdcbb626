//! Trace-driven simulation of account-to-shard allocation in a sharded ledger.
//!
//! Clients pick a shard for their own account by minimizing a congestion
//! game cost; the engine commits transactions under per-shard budgets and
//! applies the highest-gain migrations each epoch.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocators;
pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod pilot;
pub mod trace;

pub use allocators::{allocate_greedy_community, allocate_hash, hash_mapping, workload_oracle, AllocatorKind};
pub use engine::{
    commit_migrations, commit_transactions, propose_migrations, reconfigure, run_epoch, EngineError, EngineOptions,
    EpochReport, HistoryStore, MigrationRequest, SimState,
};
pub use experiment::{run_experiment, Experiment, ExperimentConfig, ExperimentError};
pub use metrics::{
    cross_shard_ratio, normalized_throughput, workload_deviation, Aggregates, MetricSeries, ReportFormat, ReportRow,
    RunManifest,
};
pub use model::{
    classify_transaction, validate_mapping, AccountId, AccountRegistry, AccountShardMapping, Classification,
    ModelError, ShardId, SimParams, Transaction,
};
pub use pilot::{decide, pilot_decide, Fusion, InteractionVector, PilotDecision, WorkloadVector};
pub use trace::{epoch_windows, gen_clustered, gen_uniform, load_trace, ClusteredSpec, EpochBatch, Trace, TraceError};

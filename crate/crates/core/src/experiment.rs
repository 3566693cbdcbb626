//! Whole-trace runs: warm-up/evaluation split, initial allocation, λ
//! resolution, and the epoch loop.

use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::allocators::{allocate_greedy_community, AllocatorKind, GREEDY_BASELINE_NOTE};
use crate::engine::{run_epoch, EngineError, EngineOptions, EpochReport, SimState};
use crate::metrics::{MetricSeries, RunManifest, SplitInfo, TraceInfo};
use crate::model::{AccountShardMapping, ModelError, SimParams};
use crate::pilot::Fusion;
use crate::trace::{windows_over, EpochBatch, Trace};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },
}

/// Everything a run needs besides the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `params.lambda` is ignored when `lambda` is `None`.
    pub params: SimParams,
    /// Per-shard capacity; `None` derives it from the evaluation traffic.
    pub lambda: Option<f64>,
    pub allocator: AllocatorKind,
    /// Starting mapping for the pilot-driven allocator.
    pub init: AllocatorKind,
    /// Cap on simulated epochs; `None` runs every full epoch.
    pub epochs: Option<usize>,
    /// Fraction of the trace's blocks used to warm up histories and the initial mapping.
    pub warmup_fraction: f64,
    pub history_window: Option<u32>,
    pub noisy_mempool: f64,
    pub fusion: Fusion,
    pub greedy_cap_factor: f64,
    /// Human-readable trace origin, recorded in the manifest.
    pub source: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: SimParams::default(),
            lambda: None,
            allocator: AllocatorKind::PilotDriven,
            init: AllocatorKind::HashRandom,
            epochs: None,
            warmup_fraction: 0.9,
            history_window: None,
            noisy_mempool: 0.0,
            fusion: Fusion::Normalized,
            greedy_cap_factor: 1.1,
            source: String::from("unknown"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |field, reason: &str| Err(ExperimentError::Config { field, reason: reason.to_owned() });
        let mut p = self.params;
        if let Some(l) = self.lambda {
            p.lambda = l;
        }
        p.validate()?;
        if self.init == AllocatorKind::PilotDriven {
            return bad("init", "must be hash or greedy");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.noisy_mempool) {
            return bad("noisy_mempool", "must lie in [0, 1]");
        }
        if !(self.greedy_cap_factor >= 1.0) || !self.greedy_cap_factor.is_finite() {
            return bad("greedy_cap_factor", "must be a finite value of at least 1");
        }
        if self.history_window == Some(0) {
            return bad("history_window", "must be at least 1");
        }
        Ok(())
    }
}

/// Stable identifier built from the parameters and the trace digest.
pub fn run_id(cfg: &ExperimentConfig, params: &SimParams, digest: &str) -> String {
    let mut id = format!(
        "{}-k{}-eta{}-tau{}-lambda{}-beta{}-seed{}",
        cfg.allocator, params.k, params.eta, params.tau, params.lambda, params.beta, params.seed
    );
    if cfg.allocator == AllocatorKind::PilotDriven {
        id.push_str(&format!("-init{}", cfg.init));
    }
    id.push('-');
    id.push_str(&digest[..digest.len().min(12)]);
    id
}

/// A run in progress over a borrowed trace.
#[derive(Debug)]
pub struct Experiment<'t> {
    trace: &'t Trace,
    windows: Vec<EpochBatch<'t>>,
    epochs: usize,
    next: usize,
    params: SimParams,
    opts: EngineOptions,
    state: SimState,
    manifest: RunManifest,
}

impl<'t> Experiment<'t> {
    pub fn new(trace: &'t Trace, cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        cfg.validate()?;
        let mut params = cfg.params;
        let k = params.k;
        let registry = trace.registry().clone();
        let txs = trace.transactions();
        let (first, last) = trace.block_range().unwrap_or((0, 0));

        let span = if trace.is_empty() { 0 } else { last - first + 1 };
        let eval_start = first + (cfg.warmup_fraction * span as f64).floor() as u64;
        let split_at = txs.partition_point(|t| t.block < eval_start);
        let (warmup, eval) = txs.split_at(split_at);

        // the partial tail stays in `windows` so the last full epoch still has a lookahead
        let windows = if eval.is_empty() { Vec::new() } else { windows_over(eval, eval_start, last, params.tau) };
        let partial_tail = windows
            .last()
            .filter(|w| w.last_block - w.first_block + 1 < params.tau)
            .map(|w| (w.first_block, w.last_block, w.len()));
        let full = windows.len() - partial_tail.is_some() as usize;
        let epochs = cfg.epochs.map_or(full, |e| e.min(full));

        let lambda_source = match cfg.lambda {
            Some(l) => {
                params.lambda = l;
                String::from("configured")
            }
            None => {
                let total: usize = windows[..epochs].iter().map(EpochBatch::len).sum();
                let mean = if epochs == 0 { 0.0 } else { total as f64 / epochs as f64 };
                params.lambda = if mean > 0.0 { mean / k as f64 } else { 1.0 };
                String::from("mean evaluation epoch transactions / k")
            }
        };

        let start = match cfg.allocator {
            AllocatorKind::PilotDriven => cfg.init,
            other => other,
        };
        let mapping = match start {
            AllocatorKind::GreedyCommunity => allocate_greedy_community(warmup, k, cfg.greedy_cap_factor, registry),
            _ => {
                let mut m = AccountShardMapping::new(k, registry)?;
                for tx in warmup {
                    for &a in tx.accounts() {
                        m.shard_of(a);
                    }
                }
                m
            }
        };

        let mut state = SimState::new(mapping, params.seed);
        for tx in warmup {
            let tag = (tx.block as i64 - eval_start as i64).div_euclid(params.tau as i64);
            state.record_history(tx, tag);
        }

        let mut notes = Vec::new();
        if cfg.allocator == AllocatorKind::GreedyCommunity || start == AllocatorKind::GreedyCommunity {
            notes.push(GREEDY_BASELINE_NOTE.to_owned());
        }
        if full == 0 {
            notes.push(String::from("evaluation segment holds no full epoch"));
        }

        let digest = trace.digest();
        let manifest = RunManifest {
            run_id: run_id(cfg, &params, &digest),
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            params,
            lambda_source,
            allocator: cfg.allocator,
            init_allocator: start,
            epochs_requested: cfg.epochs,
            epochs_run: epochs,
            history_window: cfg.history_window,
            noisy_mempool: cfg.noisy_mempool,
            fusion: cfg.fusion,
            greedy_cap_factor: cfg.greedy_cap_factor,
            split: SplitInfo {
                unit: String::from("blocks"),
                warmup_fraction: cfg.warmup_fraction,
                warmup_transactions: warmup.len(),
                evaluation_start_block: eval_start,
                full_epochs_available: full,
                partial_tail,
            },
            trace: TraceInfo {
                source: cfg.source.clone(),
                digest,
                transactions: trace.len(),
                accounts: trace.registry().len(),
                first_block: trace.block_range().map(|r| r.0),
                last_block: trace.block_range().map(|r| r.1),
            },
            notes,
        };

        let opts = EngineOptions {
            allocator: cfg.allocator,
            history_window: cfg.history_window,
            fusion: cfg.fusion,
            noisy_mempool: cfg.noisy_mempool,
        };
        Ok(Experiment { trace, windows, epochs, next: 0, params, opts, state, manifest })
    }

    /// Parameters after λ resolution.
    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn trace(&self) -> &'t Trace {
        self.trace
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    /// Runs the next epoch; `None` once every scheduled epoch has run.
    pub fn step(&mut self) -> Option<Result<EpochReport, ExperimentError>> {
        if self.next >= self.epochs {
            return None;
        }
        let cur = self.windows[self.next];
        let next = self.windows.get(self.next + 1).map_or(&[][..], |w| w.transactions);
        self.next += 1;
        let r = run_epoch(
            &mut self.state,
            cur.transactions,
            next,
            (cur.first_block, cur.last_block),
            &self.params,
            &self.opts,
        );
        if let Ok(rep) = &r {
            log::debug!(
                "epoch {} committed {} dropped {} cross {:.4} mr {}/{}",
                rep.epoch,
                rep.committed_tx,
                rep.dropped_tx,
                rep.cross_ratio,
                rep.committed_mr,
                rep.proposed_mr
            );
        }
        Some(r.map_err(ExperimentError::from))
    }

    /// Runs the remaining epochs and returns the series with its manifest.
    pub fn run(mut self) -> Result<MetricSeries, ExperimentError> {
        let mut reports = Vec::with_capacity(self.epochs - self.next);
        while let Some(r) = self.step() {
            reports.push(r?);
        }
        Ok(MetricSeries { run_manifest: Some(self.manifest), reports })
    }
}

/// Convenience wrapper: build and run.
pub fn run_experiment(trace: &Trace, cfg: &ExperimentConfig) -> Result<MetricSeries, ExperimentError> {
    Experiment::new(trace, cfg)?.run()
}

//! Client-side shard selection.
//!
//! A client summarizes its transactions as an interaction vector (how often
//! it touches accounts in each shard), blends historical and expected
//! interactions, and picks the shard of highest potential
//!
//! ```text
//! P_i = ((2η − 1)·ψ_i − η·ψ)·ω_i
//! ```
//!
//! where `ψ` is the interaction total and `ω_i` the workload of shard `i`.
//! For any two shards, `u_i − u_j = P_j − P_i` with `u` the client's total
//! processing cost, so maximizing potential minimizes cost while touching only
//! one shard's entries per evaluation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AccountId, AccountShardMapping, ShardId, SimParams, Transaction};

/// Relative tolerance for treating two scores as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PilotError {
    #[error("transaction {seq} does not involve account {account}")]
    AccountNotInTransaction { seq: u64, account: u32 },
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("beta must lie in [0, 1], got {0}")]
    Beta(f64),
}

/// Per-shard interaction counts of one account (index 0 is shard 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionVector {
    counts: Vec<f64>,
}

impl InteractionVector {
    pub fn zeros(k: usize) -> Self {
        InteractionVector { counts: vec![0.0; k] }
    }

    /// Negative entries are clamped to zero.
    pub fn from_counts(counts: Vec<f64>) -> Self {
        InteractionVector { counts: counts.into_iter().map(|c| c.max(0.0)).collect() }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Interactions outside shard `i`.
    pub fn others(&self, i: ShardId) -> f64 {
        self.total() - self.counts[i.index()]
    }

    pub fn add(&mut self, shard: ShardId, weight: f64) {
        self.counts[shard.index()] += weight;
    }

    /// Scaled to unit total; a zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total > 0.0 {
            InteractionVector { counts: self.counts.iter().map(|c| c / total).collect() }
        } else {
            self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        InteractionVector { counts: self.counts.iter().map(|x| x * c).collect() }
    }
}

/// Per-shard workload in intra-transaction-equivalent units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkloadVector {
    loads: Vec<f64>,
}

impl WorkloadVector {
    pub fn zeros(k: usize) -> Self {
        WorkloadVector { loads: vec![0.0; k] }
    }

    /// Negative entries are clamped to zero.
    pub fn from_loads(loads: Vec<f64>) -> Self {
        WorkloadVector { loads: loads.into_iter().map(|c| c.max(0.0)).collect() }
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn k(&self) -> usize {
        self.loads.len()
    }

    pub fn get(&self, i: ShardId) -> f64 {
        self.loads[i.index()]
    }

    pub fn add(&mut self, i: ShardId, units: f64) {
        self.loads[i.index()] += units;
    }

    pub fn total(&self) -> f64 {
        self.loads.iter().sum()
    }
}

/// How historical and expected interactions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    /// Each operand is scaled to unit total before mixing.
    #[default]
    Normalized,
    /// Raw counts are mixed as-is.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotDecision {
    pub chosen: ShardId,
    /// Shard the account resided in, `None` for a first placement.
    pub current: Option<ShardId>,
    /// `P_chosen − P_current`; zero for a first placement.
    pub potential_gain: f64,
    pub potentials: Vec<f64>,
}

impl PilotDecision {
    pub fn is_migration(&self) -> bool {
        self.current.is_some_and(|c| c != self.chosen) && self.potential_gain > 0.0
    }
}

/// Counts, per shard, the counterparties of `account` across `txs`,
/// resolving counterparties through `mapping`.
pub fn interaction_distribution<'a>(
    txs: impl IntoIterator<Item = &'a Transaction>,
    account: AccountId,
    mapping: &AccountShardMapping,
    k: usize,
) -> Result<InteractionVector, PilotError> {
    let mut psi = InteractionVector::zeros(k);
    for tx in txs {
        if !tx.contains(account) {
            return Err(PilotError::AccountNotInTransaction { seq: tx.seq, account: account.0 });
        }
        for b in tx.counterparties(account) {
            psi.add(mapping.lookup(b), 1.0);
        }
    }
    Ok(psi)
}

/// Same counting as [`interaction_distribution`] from pre-aggregated
/// `(counterparty, multiplicity)` pairs.
pub fn interaction_from_counterparties(
    counterparties: impl IntoIterator<Item = (AccountId, f64)>,
    mapping: &AccountShardMapping,
    k: usize,
) -> InteractionVector {
    let mut psi = InteractionVector::zeros(k);
    for (b, w) in counterparties {
        psi.add(mapping.lookup(b), w);
    }
    psi
}

/// `(1 − β)·hist + β·expected`, with both operands first scaled to unit
/// total under [`Fusion::Normalized`].
pub fn fuse_with(
    hist: &InteractionVector,
    expected: &InteractionVector,
    beta: f64,
    fusion: Fusion,
) -> Result<InteractionVector, PilotError> {
    if hist.k() != expected.k() {
        return Err(PilotError::LengthMismatch { left: hist.k(), right: expected.k() });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(PilotError::Beta(beta));
    }
    let (h, e) = match fusion {
        Fusion::Normalized => (hist.normalized(), expected.normalized()),
        Fusion::Raw => (hist.clone(), expected.clone()),
    };
    let counts = h.counts.iter().zip(&e.counts).map(|(h, e)| (1.0 - beta) * h + beta * e).collect();
    Ok(InteractionVector { counts })
}

pub fn fuse(
    hist: &InteractionVector,
    expected: &InteractionVector,
    beta: f64,
) -> Result<InteractionVector, PilotError> {
    fuse_with(hist, expected, beta, Fusion::Normalized)
}

/// Total processing cost of the account's transactions if it resides in shard `i`:
/// intra work and its share of cross work in `i`, plus the remote halves of
/// cross transactions in every other shard.
pub fn cost(psi: &InteractionVector, omega: &WorkloadVector, eta: f64, i: ShardId) -> f64 {
    let c = psi.counts();
    let w = omega.loads();
    let own = (c[i.index()] + eta * psi.others(i)) * w[i.index()];
    let remote: f64 = (0..c.len()).filter(|&j| j != i.index()).map(|j| c[j] * w[j]).sum();
    own + eta * remote
}

pub fn potential(psi: &InteractionVector, omega: &WorkloadVector, eta: f64, i: ShardId) -> f64 {
    ((2.0 * eta - 1.0) * psi.counts()[i.index()] - eta * psi.total()) * omega.get(i)
}

/// Potentials of every shard, computing the interaction total once.
pub fn potentials(psi: &InteractionVector, omega: &WorkloadVector, eta: f64) -> Vec<f64> {
    let total = psi.total();
    psi.counts().iter().zip(omega.loads()).map(|(c, w)| ((2.0 * eta - 1.0) * c - eta * total) * w).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Maximize,
    Minimize,
}

/// Picks the best shard by `scores` under the tie-break: keep `current` if it
/// is tied with the best, else the least-loaded tied shard, else the lowest
/// index. Scores within `tol · max(1, |best|)` of the best are tied.
pub fn select_shard(
    scores: &[f64],
    objective: Objective,
    current: Option<ShardId>,
    omega: &WorkloadVector,
    tol: f64,
) -> ShardId {
    assert!(!scores.is_empty(), "need at least one shard");
    let signed = |x: f64| match objective {
        Objective::Maximize => x,
        Objective::Minimize => -x,
    };
    let best = scores.iter().copied().map(signed).fold(f64::NEG_INFINITY, f64::max);
    let band = tol * best.abs().max(1.0);
    let tied = |i: usize| best - signed(scores[i]) <= band;

    if let Some(c) = current {
        if c.index() < scores.len() && tied(c.index()) {
            return c;
        }
    }
    let mut pick: Option<usize> = None;
    for i in (0..scores.len()).filter(|&i| tied(i)) {
        match pick {
            Some(p) if omega.loads()[i] >= omega.loads()[p] => {}
            _ => pick = Some(i),
        }
    }
    ShardId::from_index(pick.expect("best score is always tied with itself"))
}

/// Shard selection on an already-fused interaction vector.
pub fn decide(current: Option<ShardId>, psi: &InteractionVector, omega: &WorkloadVector, eta: f64) -> PilotDecision {
    let potentials = potentials(psi, omega, eta);
    let chosen = select_shard(&potentials, Objective::Maximize, current, omega, TIE_TOLERANCE);
    let potential_gain = match current {
        Some(c) if c != chosen => (potentials[chosen.index()] - potentials[c.index()]).max(0.0),
        _ => 0.0,
    };
    PilotDecision { chosen, current, potential_gain, potentials }
}

/// Full decision for one account from its historical and expected
/// transactions. An account without an assignment gets a first placement.
pub fn pilot_decide<'a>(
    account: AccountId,
    hist_txs: impl IntoIterator<Item = &'a Transaction>,
    expected_txs: impl IntoIterator<Item = &'a Transaction>,
    mapping: &AccountShardMapping,
    omega: &WorkloadVector,
    params: &SimParams,
    fusion: Fusion,
) -> Result<PilotDecision, PilotError> {
    let k = params.k as usize;
    if omega.k() != k {
        return Err(PilotError::LengthMismatch { left: omega.k(), right: k });
    }
    let hist = interaction_distribution(hist_txs, account, mapping, k)?;
    let expected = interaction_distribution(expected_txs, account, mapping, k)?;
    let psi = fuse_with(&hist, &expected, params.beta, fusion)?;
    Ok(decide(mapping.get(account), &psi, omega, params.eta))
}

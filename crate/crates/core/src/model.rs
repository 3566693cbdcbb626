//! Core domain types: accounts, shards, transactions and the account-shard
//! mapping.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocators::allocate_hash;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shard count must be at least 1")]
    ZeroShards,
    #[error("shard {shard} out of range [1, {k}]")]
    ShardOutOfRange { shard: u32, k: u32 },
    #[error("account index {0} is not interned")]
    UnknownAccount(u32),
    #[error("account id must be non-empty")]
    EmptyAccountId,
    #[error("transaction must touch at least one account")]
    EmptyTransaction,
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

/// Dense index of an interned account id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccountId(pub u32);

impl AccountId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One-based shard identifier in `[1, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShardId(u32);

impl ShardId {
    /// Builds a shard id, checking `1 <= id <= k`.
    pub fn new(id: u32, k: u32) -> Result<Self, ModelError> {
        if id == 0 || id > k {
            return Err(ModelError::ShardOutOfRange { shard: id, k });
        }
        Ok(ShardId(id))
    }

    /// Builds a shard id without a range check. `validate_mapping` reports
    /// ids that turn out to be out of range.
    pub const fn new_unchecked(id: u32) -> Self {
        ShardId(id)
    }

    /// Shard id for a zero-based vector position.
    #[inline]
    pub fn from_index(index: usize) -> Self {
        ShardId(index as u32 + 1)
    }

    /// Zero-based position in per-shard vectors.
    #[inline]
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for ShardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between external account id strings and dense indices.
#[derive(Debug, Clone, Default)]
pub struct AccountRegistry {
    names: Vec<String>,
    index: HashMap<String, AccountId>,
}

impl AccountRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index for `name`, assigning the next free one on first sight.
    pub fn intern(&mut self, name: &str) -> Result<AccountId, ModelError> {
        if name.is_empty() {
            return Err(ModelError::EmptyAccountId);
        }
        if let Some(&id) = self.index.get(name) {
            return Ok(id);
        }
        let id = AccountId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn get(&self, name: &str) -> Option<AccountId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: AccountId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = AccountId> + '_ {
        (0..self.names.len() as u32).map(AccountId)
    }
}

/// A trace record: the set of accounts a transaction modifies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub seq: u64,
    pub block: u64,
    accounts: Vec<AccountId>,
}

impl Transaction {
    /// Duplicate accounts are collapsed, keeping first-occurrence order, so a
    /// self-transfer becomes an arity-1 transaction.
    pub fn new(seq: u64, block: u64, accounts: impl IntoIterator<Item = AccountId>) -> Result<Self, ModelError> {
        let mut out: Vec<AccountId> = Vec::with_capacity(2);
        for a in accounts {
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(ModelError::EmptyTransaction);
        }
        Ok(Transaction { seq, block, accounts: out })
    }

    pub fn accounts(&self) -> &[AccountId] {
        &self.accounts
    }

    pub fn contains(&self, account: AccountId) -> bool {
        self.accounts.contains(&account)
    }

    /// Accounts other than `account`.
    pub fn counterparties(&self, account: AccountId) -> impl Iterator<Item = AccountId> + '_ {
        self.accounts.iter().copied().filter(move |&a| a != account)
    }
}

/// The account-shard mapping. Every account in the shared registry resolves
/// to a shard: explicitly assigned ones by lookup, the rest by the hash rule.
#[derive(Debug, Clone)]
pub struct AccountShardMapping {
    k: u32,
    registry: Arc<AccountRegistry>,
    assignment: Vec<Option<ShardId>>,
}

impl AccountShardMapping {
    pub fn new(k: u32, registry: Arc<AccountRegistry>) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::ZeroShards);
        }
        Ok(AccountShardMapping { k, assignment: vec![None; registry.len()], registry })
    }

    /// Builds a mapping from raw pairs without range checks.
    pub fn from_assignments(
        k: u32,
        registry: Arc<AccountRegistry>,
        pairs: impl IntoIterator<Item = (AccountId, ShardId)>,
    ) -> Result<Self, ModelError> {
        let mut m = Self::new(k, registry)?;
        for (a, s) in pairs {
            if a.index() >= m.assignment.len() {
                return Err(ModelError::UnknownAccount(a.0));
            }
            m.assignment[a.index()] = Some(s);
        }
        Ok(m)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn registry(&self) -> &Arc<AccountRegistry> {
        &self.registry
    }

    /// The explicit assignment, if the account has been registered.
    pub fn get(&self, account: AccountId) -> Option<ShardId> {
        self.assignment.get(account.index()).copied().flatten()
    }

    pub fn is_registered(&self, account: AccountId) -> bool {
        self.get(account).is_some()
    }

    pub fn assign(&mut self, account: AccountId, shard: ShardId) -> Result<(), ModelError> {
        if shard.get() == 0 || shard.get() > self.k {
            return Err(ModelError::ShardOutOfRange { shard: shard.get(), k: self.k });
        }
        let slot = self.assignment.get_mut(account.index()).ok_or(ModelError::UnknownAccount(account.0))?;
        *slot = Some(shard);
        Ok(())
    }

    /// Resolves an account without registering it.
    pub fn lookup(&self, account: AccountId) -> ShardId {
        match self.get(account) {
            Some(s) => s,
            None => self.hash_shard(account),
        }
    }

    /// Resolves an account, registering it under the hash rule on first sight.
    pub fn shard_of(&mut self, account: AccountId) -> ShardId {
        if let Some(s) = self.get(account) {
            return s;
        }
        let s = self.hash_shard(account);
        if let Some(slot) = self.assignment.get_mut(account.index()) {
            *slot = Some(s);
        }
        s
    }

    fn hash_shard(&self, account: AccountId) -> ShardId {
        match self.registry.name(account) {
            Some(name) => allocate_hash(name, self.k),
            // Not interned: fall back on the decimal index so resolution stays total.
            None => allocate_hash(&account.0.to_string(), self.k),
        }
    }

    /// Registered accounts with their shards, in index order.
    pub fn assignments(&self) -> impl Iterator<Item = (AccountId, ShardId)> + '_ {
        self.assignment.iter().enumerate().filter_map(|(i, s)| s.map(|s| (AccountId(i as u32), s)))
    }

    pub fn registered_count(&self) -> usize {
        self.assignment.iter().filter(|s| s.is_some()).count()
    }

    /// Number of registered accounts per shard (index 0 is shard 1).
    /// Out-of-range entries are ignored.
    pub fn shard_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k as usize];
        for (_, s) in self.assignments() {
            if let Some(c) = sizes.get_mut(s.index()) {
                *c += 1;
            }
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Unassigned(AccountId),
    OutOfRange { account: AccountId, shard: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks uniqueness and completeness of `mapping` over `accounts`.
///
/// Uniqueness holds structurally (one slot per account), so only missing
/// and out-of-range assignments can be reported.
pub fn validate_mapping(
    mapping: &AccountShardMapping,
    accounts: impl IntoIterator<Item = AccountId>,
) -> ValidationReport {
    let mut violations = Vec::new();
    for a in accounts {
        match mapping.get(a) {
            None => violations.push(Violation::Unassigned(a)),
            Some(s) if s.get() == 0 || s.get() > mapping.k() => {
                violations.push(Violation::OutOfRange { account: a, shard: s.get() })
            }
            Some(_) => {}
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Intra(ShardId),
    /// Sorted, distinct shards; always at least two.
    Cross(Vec<ShardId>),
}

impl Classification {
    pub fn is_cross(&self) -> bool {
        matches!(self, Classification::Cross(_))
    }

    pub fn shards(&self) -> &[ShardId] {
        match self {
            Classification::Intra(s) => std::slice::from_ref(s),
            Classification::Cross(v) => v,
        }
    }
}

/// Intra iff every account of `tx` resolves to the same shard.
pub fn classify_transaction(tx: &Transaction, mapping: &AccountShardMapping) -> Classification {
    let mut shards: Vec<ShardId> = tx.accounts().iter().map(|&a| mapping.lookup(a)).collect();
    shards.sort_unstable();
    shards.dedup();
    if shards.len() == 1 {
        Classification::Intra(shards[0])
    } else {
        Classification::Cross(shards)
    }
}

/// Simulation parameters shared by the allocator, the decision rule and the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Number of shards.
    pub k: u32,
    /// Cost multiplier of a cross-shard transaction relative to an intra one.
    pub eta: f64,
    /// Blocks per epoch.
    pub tau: u64,
    /// Per-shard, per-epoch capacity in intra-equivalent units.
    pub lambda: f64,
    /// Fraction of next-epoch transactions a client knows in advance.
    pub beta: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { k: 16, eta: 2.0, tau: 300, lambda: 1.0, beta: 0.0, seed: 0 }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field, reason: &str| Err(ModelError::InvalidParam { field, reason: reason.to_owned() });
        if self.k < 1 {
            return bad("k", "must be at least 1");
        }
        if !(self.eta > 1.0) || !self.eta.is_finite() {
            return bad("eta", "must be a finite value greater than 1");
        }
        if self.tau < 1 {
            return bad("tau", "must be at least 1");
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad("lambda", "must be a finite positive value");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", "must lie in [0, 1]");
        }
        Ok(())
    }
}

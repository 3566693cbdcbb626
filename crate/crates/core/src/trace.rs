//! Transaction traces: CSV ingestion, synthetic generators and epoch slicing.
//!
//! The on-disk format is a four-column CSV with header
//! `block_number,tx_index,from,to`. An empty `to` marks a contract creation
//! (a single-account transaction).

use std::io::{Read, Write};
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{AccountId, AccountRegistry, ModelError, Transaction};

pub const CSV_HEADER: [&str; 4] = ["block_number", "tx_index", "from", "to"];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("missing or malformed header, expected `block_number,tx_index,from,to`")]
    Header,
    #[error("invalid generator parameter `{field}`: {reason}")]
    Generator { field: &'static str, reason: String },
    #[error("transaction {seq} touches {arity} accounts; the CSV format holds at most 2")]
    Arity { seq: u64, arity: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One raw row before interning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub block: u64,
    pub tx_index: u64,
    pub from: String,
    pub to: String,
}

/// An ordered transaction trace with its interned account universe.
#[derive(Debug, Clone)]
pub struct Trace {
    registry: Arc<AccountRegistry>,
    transactions: Vec<Transaction>,
}

impl Trace {
    /// Sorts records by `(block, tx_index)` (stable), interns accounts in
    /// first-appearance order and assigns `seq` as the sorted position.
    pub fn from_records(mut records: Vec<TraceRecord>) -> Result<Self, TraceError> {
        records.sort_by_key(|r| (r.block, r.tx_index));
        let mut registry = AccountRegistry::new();
        let mut transactions = Vec::with_capacity(records.len());
        for (seq, r) in records.iter().enumerate() {
            let mut accounts = Vec::with_capacity(2);
            for name in [&r.from, &r.to] {
                if !name.is_empty() {
                    accounts.push(registry.intern(name).expect("non-empty"));
                }
            }
            let tx = Transaction::new(seq as u64, r.block, accounts).map_err(|e| match e {
                ModelError::EmptyTransaction => TraceError::Parse {
                    line: 0,
                    reason: format!("block {} index {}: no accounts", r.block, r.tx_index),
                },
                other => TraceError::Parse { line: 0, reason: other.to_string() },
            })?;
            transactions.push(tx);
        }
        Ok(Trace { registry: Arc::new(registry), transactions })
    }

    /// Builds a trace from already-interned transactions. They are sorted by
    /// `(block, seq)`.
    pub fn from_parts(registry: Arc<AccountRegistry>, mut transactions: Vec<Transaction>) -> Self {
        transactions.sort_by_key(|t| (t.block, t.seq));
        Trace { registry, transactions }
    }

    pub fn registry(&self) -> &Arc<AccountRegistry> {
        &self.registry
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// `[first, last]` block numbers, `None` for an empty trace.
    pub fn block_range(&self) -> Option<(u64, u64)> {
        Some((self.transactions.first()?.block, self.transactions.last()?.block))
    }

    /// Transactions with `from <= block < to`.
    pub fn blocks(&self, from: u64, to: u64) -> &[Transaction] {
        let lo = self.transactions.partition_point(|t| t.block < from);
        let hi = self.transactions.partition_point(|t| t.block < to);
        &self.transactions[lo..hi.max(lo)]
    }

    /// SHA-256 over a canonical rendering of the trace (block and account
    /// names per transaction), hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for tx in &self.transactions {
            h.update(tx.block.to_le_bytes());
            for a in tx.accounts() {
                h.update(b"\x1f");
                h.update(self.registry.name(*a).unwrap_or_default().as_bytes());
            }
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Writes the trace in the CSV format, numbering `tx_index` within each block.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(CSV_HEADER)?;
        let mut prev_block = None;
        let mut idx = 0u64;
        for tx in &self.transactions {
            if prev_block == Some(tx.block) {
                idx += 1;
            } else {
                idx = 0;
                prev_block = Some(tx.block);
            }
            let name = |a: AccountId| self.registry.name(a).unwrap_or_default();
            let (from, to) = match tx.accounts() {
                [a] => (name(*a), ""),
                [a, b] => (name(*a), name(*b)),
                more => return Err(TraceError::Arity { seq: tx.seq, arity: more.len() }),
            };
            out.write_record([tx.block.to_string().as_str(), idx.to_string().as_str(), from, to])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parses a CSV trace. Rows out of `(block_number, tx_index)` order are
/// sorted, with a warning.
pub fn load_trace<R: Read>(source: R) -> Result<Trace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(source);
    let mut rows = rdr.records();

    let header = rows.next().ok_or(TraceError::Header)??;
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(TraceError::Header);
    }

    let mut records = Vec::new();
    let mut sorted = true;
    let mut last_key = None;
    for row in rows {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 4 {
            return Err(TraceError::Parse { line, reason: format!("expected 4 columns, found {}", row.len()) });
        }
        let int = |i: usize, what: &str| {
            row[i].trim().parse::<u64>().map_err(|_| TraceError::Parse {
                line,
                reason: format!("{what} `{}` is not a non-negative integer", &row[i]),
            })
        };
        let block = int(0, "block_number")?;
        let tx_index = int(1, "tx_index")?;
        let from = row[2].trim().to_owned();
        let to = row[3].trim().to_owned();
        if from.is_empty() && to.is_empty() {
            return Err(TraceError::Parse { line, reason: "row names no account".into() });
        }
        let key = (block, tx_index);
        if last_key.is_some_and(|k| k > key) {
            sorted = false;
        }
        last_key = Some(key);
        records.push(TraceRecord { block, tx_index, from, to });
    }
    if !sorted {
        log::warn!("trace rows are not sorted by (block_number, tx_index); sorting");
    }
    Trace::from_records(records)
}

/// Transactions of one reconfiguration period.
#[derive(Debug, Clone, Copy)]
pub struct EpochBatch<'a> {
    pub epoch_index: usize,
    /// First block covered (inclusive).
    pub first_block: u64,
    /// Last block covered (inclusive).
    pub last_block: u64,
    pub transactions: &'a [Transaction],
}

impl<'a> EpochBatch<'a> {
    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }
}

/// Tiles the whole trace into windows of `tau` blocks starting at its first block.
pub fn epoch_windows(trace: &Trace, tau: u64) -> Vec<EpochBatch<'_>> {
    match trace.block_range() {
        Some((first, last)) => windows_over(trace.transactions(), first, last, tau),
        None => Vec::new(),
    }
}

/// Tiles blocks `[first, last]` of a block-sorted slice into windows of
/// `tau` blocks. Empty windows are kept.
pub fn windows_over(txs: &[Transaction], first: u64, last: u64, tau: u64) -> Vec<EpochBatch<'_>> {
    assert!(tau >= 1, "tau must be at least 1");
    if last < first {
        return Vec::new();
    }
    let n = (last - first) / tau + 1;
    let mut out = Vec::with_capacity(n as usize);
    let mut lo = txs.partition_point(|t| t.block < first);
    for e in 0..n {
        let start = first + e * tau;
        let end = start.saturating_add(tau - 1).min(last);
        let hi = lo + txs[lo..].partition_point(|t| t.block <= end);
        out.push(EpochBatch {
            epoch_index: e as usize,
            first_block: start,
            last_block: end,
            transactions: &txs[lo..hi],
        });
        lo = hi;
    }
    out
}

fn uniform_name(i: usize) -> String {
    format!("a{i}")
}

/// Uniform two-party traffic over `n_accounts` accounts named `a0, a1, ...`.
pub fn gen_uniform(n_accounts: usize, txs_per_block: usize, n_blocks: u64, seed: u64) -> Result<Trace, TraceError> {
    if n_accounts < 2 {
        return Err(TraceError::Generator { field: "accounts", reason: "need at least 2 accounts".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(txs_per_block * n_blocks as usize);
    for block in 0..n_blocks {
        for tx_index in 0..txs_per_block as u64 {
            let a = rng.random_range(0..n_accounts);
            let mut b = rng.random_range(0..n_accounts - 1);
            if b >= a {
                b += 1;
            }
            records.push(TraceRecord { block, tx_index, from: uniform_name(a), to: uniform_name(b) });
        }
    }
    Trace::from_records(records)
}

/// Parameters of the community-structured generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteredSpec {
    pub n_communities: usize,
    pub accounts_per_community: usize,
    /// Probability that the second endpoint comes from the home community.
    pub p_intra: f64,
    pub txs_per_block: usize,
    pub n_blocks: u64,
    /// Per-block probability that a never-seen account joins a transaction.
    pub churn: f64,
    pub seed: u64,
}

/// Community an account generated by [`gen_clustered`] belongs to, parsed
/// from its `c<community>-...` name.
pub fn community_of(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('c')?;
    let (c, _) = rest.split_once('-')?;
    c.parse().ok()
}

/// Community-structured traffic.
///
/// Each transaction picks a uniform home community and a uniform first
/// endpoint in it. With probability `p_intra` the second endpoint is another
/// member of the home community, otherwise it is uniform over all accounts.
/// With probability `churn` per block, one transaction of the block has its
/// second endpoint replaced by a fresh account that joins the home community.
pub fn gen_clustered(spec: &ClusteredSpec) -> Result<Trace, TraceError> {
    let g = |field, reason: &str| Err(TraceError::Generator { field, reason: reason.to_owned() });
    if spec.n_communities == 0 {
        return g("communities", "must be at least 1");
    }
    if spec.accounts_per_community == 0 {
        return g("size", "must be at least 1");
    }
    if spec.n_communities * spec.accounts_per_community < 2 {
        return g("size", "need at least 2 accounts in total");
    }
    if !(0.0..=1.0).contains(&spec.p_intra) {
        return g("p_intra", "must lie in [0, 1]");
    }
    if !(0.0..=1.0).contains(&spec.churn) {
        return g("churn", "must lie in [0, 1]");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut members: Vec<Vec<String>> = (0..spec.n_communities)
        .map(|c| (0..spec.accounts_per_community).map(|j| format!("c{c}-{j}")).collect())
        .collect();
    // (community, member position) for uniform draws over every account
    let mut all: Vec<(usize, usize)> =
        (0..spec.n_communities).flat_map(|c| (0..spec.accounts_per_community).map(move |j| (c, j))).collect();
    // position in `all` of each member
    let mut flat: Vec<Vec<usize>> = (0..spec.n_communities)
        .map(|c| (0..spec.accounts_per_community).map(|j| c * spec.accounts_per_community + j).collect())
        .collect();
    let mut fresh = 0usize;

    let mut records = Vec::with_capacity(spec.txs_per_block * spec.n_blocks as usize);
    for block in 0..spec.n_blocks {
        let churn_at = if spec.txs_per_block > 0 && rng.random_bool(spec.churn) {
            Some(rng.random_range(0..spec.txs_per_block))
        } else {
            None
        };
        for t in 0..spec.txs_per_block {
            let home = rng.random_range(0..spec.n_communities);
            let a = rng.random_range(0..members[home].len());
            let from = members[home][a].clone();
            let intra = rng.random_bool(spec.p_intra);
            let to = if churn_at == Some(t) {
                let name = format!("c{home}-n{fresh}");
                fresh += 1;
                members[home].push(name.clone());
                flat[home].push(all.len());
                all.push((home, members[home].len() - 1));
                name
            } else if intra && members[home].len() >= 2 {
                let mut b = rng.random_range(0..members[home].len() - 1);
                if b >= a {
                    b += 1;
                }
                members[home][b].clone()
            } else {
                let mut b = rng.random_range(0..all.len() - 1);
                if b >= flat[home][a] {
                    b += 1;
                }
                let (c, j) = all[b];
                members[c][j].clone()
            };
            records.push(TraceRecord { block, tx_index: t as u64, from, to });
        }
    }
    Trace::from_records(records)
}

/// Number of items kept for knowledge ratio `beta` out of `n`: `beta * n`
/// rounded half up.
pub fn expected_count(n: usize, beta: f64) -> usize {
    ((beta * n as f64 + 0.5).floor() as usize).min(n)
}

/// Uniform random subset of `expected_count(len, beta)` items, in input order.
pub fn sample_expected<T: Clone, R: Rng + ?Sized>(items: &[T], beta: f64, rng: &mut R) -> Vec<T> {
    let m = expected_count(items.len(), beta);
    if m == items.len() {
        return items.to_vec();
    }
    let mut picked = index::sample(rng, items.len(), m).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// [`sample_expected`] driven by a fresh generator seeded with `seed`.
pub fn sample_expected_seeded<T: Clone>(items: &[T], beta: f64, seed: u64) -> Vec<T> {
    sample_expected(items, beta, &mut ChaCha8Rng::seed_from_u64(seed))
}

//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use shardsim_core::trace::ClusteredSpec;
use shardsim_core::{
    gen_clustered, hash_mapping, AccountId, AccountRegistry, AccountShardMapping, Trace, Transaction, WorkloadVector,
};

/// Community trace with `blocks` blocks of 100 transactions over 16 × 100 accounts.
pub fn clustered_trace(blocks: u64) -> Trace {
    gen_clustered(&ClusteredSpec {
        n_communities: 16,
        accounts_per_community: 100,
        p_intra: 0.9,
        txs_per_block: 100,
        n_blocks: blocks,
        churn: 0.01,
        seed: 1,
    })
    .expect("valid generator parameters")
}

/// Inputs for one decision: a hash mapping over 1000 accounts and `n`
/// two-party transactions of account 0, split evenly into history and lookahead.
pub struct DecisionFixture {
    pub mapping: AccountShardMapping,
    pub hist: Vec<Transaction>,
    pub expected: Vec<Transaction>,
    pub omega: WorkloadVector,
}

pub fn decision_fixture(k: u32, n: usize) -> DecisionFixture {
    let mut reg = AccountRegistry::new();
    for i in 0..1_000 {
        reg.intern(&format!("p{i}")).expect("non-empty name");
    }
    let mapping = hash_mapping(k, Arc::new(reg));
    let txs: Vec<Transaction> = (0..n)
        .map(|s| {
            Transaction::new(s as u64, 0, [AccountId(0), AccountId(1 + (s as u32 * 7919) % 999)]).expect("two accounts")
        })
        .collect();
    let omega = WorkloadVector::from_loads((0..k).map(|i| 100.0 + i as f64).collect());
    let (hist, expected) = txs.split_at(n / 2);
    DecisionFixture { mapping, hist: hist.to_vec(), expected: expected.to_vec(), omega }
}

//! Allocation strategies and the workload oracle.
//!
//! `GreedyCommunity` is a simple graph-based comparison point (label
//! propagation followed by capacity-bounded bin packing). It is a stand-in
//! for proper graph partitioners, and reports label it as a non-faithful baseline.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{
    classify_transaction, AccountId, AccountRegistry, AccountShardMapping, Classification, ShardId, Transaction,
};
use crate::pilot::WorkloadVector;

/// Label-propagation round limit of the greedy baseline.
pub const LABEL_PROPAGATION_ROUNDS: usize = 20;

pub const GREEDY_BASELINE_NOTE: &str =
    "greedy is a non-faithful baseline (label propagation + greedy bin packing), not a graph partitioner";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorKind {
    #[serde(rename = "hash")]
    HashRandom,
    #[serde(rename = "greedy")]
    GreedyCommunity,
    #[serde(rename = "pilot")]
    PilotDriven,
}

impl AllocatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorKind::HashRandom => "hash",
            AllocatorKind::GreedyCommunity => "greedy",
            AllocatorKind::PilotDriven => "pilot",
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hash" => Ok(AllocatorKind::HashRandom),
            "greedy" => Ok(AllocatorKind::GreedyCommunity),
            "pilot" => Ok(AllocatorKind::PilotDriven),
            other => Err(format!("unknown allocator `{other}` (expected hash, greedy or pilot)")),
        }
    }
}

/// `SHA-256(id) mod k + 1`, reading the digest as a big-endian integer.
pub fn allocate_hash(account: &str, k: u32) -> ShardId {
    assert!(k >= 1, "k must be at least 1");
    let digest = Sha256::digest(account.as_bytes());
    let k = k as u64;
    let rem = digest.iter().fold(0u64, |r, &b| ((r << 8) | b as u64) % k);
    ShardId::from_index(rem as usize)
}

/// Static hash allocation of every account in the registry.
pub fn hash_mapping(k: u32, registry: Arc<AccountRegistry>) -> AccountShardMapping {
    let pairs: Vec<(AccountId, ShardId)> =
        registry.ids().map(|a| (a, allocate_hash(registry.name(a).expect("interned"), k))).collect();
    AccountShardMapping::from_assignments(k, registry, pairs).expect("ids come from the registry")
}

/// Undirected co-occurrence graph in adjacency-list form.
struct InteractionGraph {
    adj: Vec<Vec<(u32, f64)>>,
    /// Transactions each node appears in.
    activity: Vec<f64>,
    nodes: Vec<AccountId>,
}

impl InteractionGraph {
    fn build(txs: &[Transaction]) -> Self {
        let mut local: HashMap<AccountId, u32> = HashMap::new();
        let mut nodes = Vec::new();
        let mut edges: HashMap<(u32, u32), f64> = HashMap::new();
        let mut activity = Vec::new();
        for tx in txs {
            let ids: Vec<u32> = tx
                .accounts()
                .iter()
                .map(|&a| {
                    *local.entry(a).or_insert_with(|| {
                        nodes.push(a);
                        activity.push(0.0);
                        (nodes.len() - 1) as u32
                    })
                })
                .collect();
            for (x, &u) in ids.iter().enumerate() {
                activity[u as usize] += 1.0;
                for &v in &ids[x + 1..] {
                    *edges.entry((u.min(v), u.max(v))).or_default() += 1.0;
                }
            }
        }
        // Nodes are renumbered in account-index order so propagation order
        // does not depend on trace order.
        let mut order: Vec<u32> = (0..nodes.len() as u32).collect();
        order.sort_by_key(|&u| nodes[u as usize]);
        let mut rank = vec![0u32; nodes.len()];
        for (r, &u) in order.iter().enumerate() {
            rank[u as usize] = r as u32;
        }
        let mut adj = vec![Vec::new(); nodes.len()];
        let mut sorted_edges: Vec<((u32, u32), f64)> = edges.into_iter().collect();
        sorted_edges.sort_by_key(|&((u, v), _)| (u, v));
        for ((u, v), w) in sorted_edges {
            let (ru, rv) = (rank[u as usize], rank[v as usize]);
            adj[ru as usize].push((rv, w));
            adj[rv as usize].push((ru, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        let nodes_sorted = order.iter().map(|&u| nodes[u as usize]).collect();
        let activity_sorted = order.iter().map(|&u| activity[u as usize]).collect();
        InteractionGraph { adj, activity: activity_sorted, nodes: nodes_sorted }
    }
}

/// In-place label propagation. Labels start as node ranks; each node adopts
/// the neighbor label of greatest total edge weight, keeping its own label on
/// ties and otherwise taking the smallest tied label.
fn label_propagation(graph: &InteractionGraph, max_rounds: usize) -> Vec<u32> {
    let n = graph.adj.len();
    let mut labels: Vec<u32> = (0..n as u32).collect();
    let mut weight: HashMap<u32, f64> = HashMap::new();
    for _ in 0..max_rounds {
        let mut changed = false;
        for u in 0..n {
            if graph.adj[u].is_empty() {
                continue;
            }
            weight.clear();
            for &(v, w) in &graph.adj[u] {
                *weight.entry(labels[v as usize]).or_default() += w;
            }
            let best_w = weight.values().copied().fold(f64::NEG_INFINITY, f64::max);
            let own = labels[u];
            let next = if weight.get(&own).is_some_and(|&w| w == best_w) {
                own
            } else {
                weight.iter().filter(|(_, &w)| w == best_w).map(|(&l, _)| l).min().expect("non-empty")
            };
            if next != own {
                labels[u] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Graph-based baseline: communities by label propagation, then packed into
/// shards by descending community activity, always filling the least-loaded
/// shard with room. A shard holds at most `ceil(cap_factor · |A| / k)`
/// accounts; communities that do not fit are split.
pub fn allocate_greedy_community(
    txs: &[Transaction],
    k: u32,
    cap_factor: f64,
    registry: Arc<AccountRegistry>,
) -> AccountShardMapping {
    assert!(k >= 1, "k must be at least 1");
    assert!(cap_factor >= 1.0, "cap_factor must be at least 1");
    let graph = InteractionGraph::build(txs);
    let n = graph.nodes.len();
    let labels = label_propagation(&graph, LABEL_PROPAGATION_ROUNDS);

    let mut communities: HashMap<u32, Vec<usize>> = HashMap::new();
    for (u, &l) in labels.iter().enumerate() {
        communities.entry(l).or_default().push(u);
    }
    let mut communities: Vec<(u32, Vec<usize>, f64)> = communities
        .into_iter()
        .map(|(l, members)| {
            let w = members.iter().map(|&u| graph.activity[u]).sum();
            (l, members, w)
        })
        .collect();
    communities.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let cap = ((cap_factor * n as f64 / k as f64).ceil() as usize).max(1);
    let mut load = vec![0.0f64; k as usize];
    let mut size = vec![0usize; k as usize];
    let mut pairs = Vec::with_capacity(n);
    for (_, members, _) in communities {
        let mut rest = members.as_slice();
        while !rest.is_empty() {
            let shard = (0..k as usize)
                .filter(|&s| size[s] < cap)
                .min_by(|&a, &b| load[a].total_cmp(&load[b]).then(a.cmp(&b)))
                .expect("total capacity covers every account");
            let take = (cap - size[shard]).min(rest.len());
            for &u in &rest[..take] {
                pairs.push((graph.nodes[u], ShardId::from_index(shard)));
                load[shard] += graph.activity[u];
            }
            size[shard] += take;
            rest = &rest[take..];
        }
    }
    AccountShardMapping::from_assignments(k, registry, pairs).expect("nodes come from the registry")
}

/// Workload per shard: one unit per intra-shard transaction and `eta` units
/// per cross-shard transaction in every shard it touches.
pub fn workload_oracle(txs: &[Transaction], mapping: &AccountShardMapping, eta: f64) -> WorkloadVector {
    let mut omega = WorkloadVector::zeros(mapping.k() as usize);
    for tx in txs {
        match classify_transaction(tx, mapping) {
            Classification::Intra(s) => omega.add(s, 1.0),
            Classification::Cross(shards) => {
                for s in shards {
                    omega.add(s, eta);
                }
            }
        }
    }
    omega
}

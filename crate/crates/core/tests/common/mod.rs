#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trustconnect::{DependencyGraph, EcuNode, NodeId, Snapshot};

/// Direct transcription of the trust sum, evaluated in ascending id order:
/// T(i) = sum over j with edge (i, j) of eps_j * alpha * C(j) + exp(-k * |obs_i - inf_ij|),
/// C(j) = T(j) once j has been scored in this pass, c0 otherwise.
pub fn oracle_single_pass(
    graph: &DependencyGraph,
    snapshot: &Snapshot,
    k: f64,
    alpha: f64,
    c0: f64,
) -> BTreeMap<NodeId, f64> {
    let eps: BTreeMap<NodeId, f64> = graph.nodes().iter().map(|n| (n.id, n.epsilon)).collect();
    let mut scored: BTreeMap<NodeId, f64> = BTreeMap::new();
    for &i in eps.keys() {
        let mut total = 0.0;
        for &(from, j) in graph.edges() {
            if from != i {
                continue;
            }
            let d = (snapshot.observed[&i] - snapshot.inferred[&(i, j)]).abs();
            let w = (-k * d).exp();
            let c = scored.get(&j).copied().unwrap_or(c0);
            total += eps[&j] * alpha * c + w;
        }
        scored.insert(i, total);
    }
    scored
}

/// Random valid graph on up to `max_nodes` nodes with sparse, shuffled ids.
pub fn random_small_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> DependencyGraph {
    let n = rng.random_range(1..=max_nodes);
    let mut ids = BTreeSet::new();
    while ids.len() < n {
        ids.insert(rng.random_range(0..50u32));
    }
    let ids: Vec<NodeId> = ids.into_iter().collect();
    let p = rng.random::<f64>();
    let nodes = ids.iter().map(|&id| EcuNode::labelled(id, rng.random::<f64>())).collect();
    let mut edges = Vec::new();
    for &i in &ids {
        for &j in &ids {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    DependencyGraph::new(nodes, edges).unwrap()
}

/// Random snapshot with arbitrary values for every node and edge.
pub fn random_snapshot(rng: &mut ChaCha8Rng, graph: &DependencyGraph) -> Snapshot {
    Snapshot {
        observed: graph.nodes().iter().map(|n| (n.id, rng.random_range(-10.0..10.0))).collect(),
        inferred: graph
            .edges()
            .iter()
            .map(|&e| (e, rng.random_range(-10.0..10.0)))
            .collect(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Proptest strategy: a small valid graph plus a complete snapshot.
pub fn graph_and_snapshot() -> impl Strategy<Value = (DependencyGraph, Snapshot)> {
    any::<u64>().prop_map(|seed| {
        let mut r = rng(seed);
        let g = random_small_graph(&mut r, 6);
        let s = random_snapshot(&mut r, &g);
        (g, s)
    })
}

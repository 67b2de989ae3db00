//! The committed 20-ECU reference topology.
//!
//! The pinned structure: E2 depends on exactly {E1, E4, E5, E11, E13, E17};
//! E5, E13 and E18 have out-degrees 3, 4 and 4 and resilience >= 0.9; E2 and
//! E9 have resilience <= 0.3. Everything else comes from a seeded random
//! graph. The files under `fixtures/` are the frozen output of
//! [`derive_reference_fixture`] at [`FIXTURE_SEED`] and are what callers get;
//! the derivation is kept only to document and re-check them.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{generate_random, DependencyGraph, EcuNode, EpsilonDistribution, NodeId};
use crate::snapshot::{AttackMode, AttackSpec, ScenarioSpec};

pub const FIXTURE_VERSION: u32 = 1;
pub const FIXTURE_SEED: u64 = 2025;
pub const FIXTURE_GRAPH: &str = include_str!("../../fixtures/reference_fixture.graph");
pub const FIXTURE_SCENARIO: &str = include_str!("../../fixtures/reference_fixture.scenario");
/// SHA-256 of [`FIXTURE_GRAPH`]. Changing the fixture requires bumping
/// [`FIXTURE_VERSION`] along with this value.
pub const FIXTURE_GRAPH_SHA256: &str =
    "942cb791bfa5aaa41396e8c86e15f2024a1e2a9d21494517f99be02d3b3fca1b";

/// Low-connectivity, hard-to-attack ECUs.
pub const RESILIENT: [NodeId; 3] = [5, 13, 18];
pub const RESILIENT_OUT_DEGREES: [usize; 3] = [3, 4, 4];
/// Easy-to-attack ECUs.
pub const VULNERABLE: [NodeId; 2] = [2, 9];
pub const E2_DEPENDENCIES: [NodeId; 6] = [1, 4, 5, 11, 13, 17];
/// The low-resilience dependencies of E2 attacked in the fixture scenario.
pub const COMPROMISED: [NodeId; 3] = [1, 4, 11];

const NODES: usize = 20;
const EDGE_PROBABILITY: f64 = 0.15;
const PIN_STREAM: u64 = 2;

/// The committed fixture graph and its attack scenario.
pub fn reference_fixture() -> (DependencyGraph, ScenarioSpec) {
    let graph = DependencyGraph::from_text(FIXTURE_GRAPH).expect("committed fixture graph parses");
    let scenario =
        ScenarioSpec::from_text(FIXTURE_SCENARIO).expect("committed fixture scenario parses");
    (graph, scenario)
}

/// Rebuilds the fixture from a seed.
pub fn derive_reference_fixture(seed: u64) -> Result<(DependencyGraph, ScenarioSpec)> {
    let base = generate_random(NODES, EDGE_PROBABILITY, EpsilonDistribution::default(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PIN_STREAM);

    let mut edges: BTreeSet<(NodeId, NodeId)> = base.edges().iter().copied().collect();
    edges.retain(|&(i, _)| i != 2);
    edges.extend(E2_DEPENDENCIES.iter().map(|&j| (2, j)));

    for (&node, &degree) in RESILIENT.iter().zip(&RESILIENT_OUT_DEGREES) {
        let mut targets: Vec<NodeId> =
            edges.iter().filter(|&&(i, _)| i == node).map(|&(_, j)| j).collect();
        while targets.len() > degree {
            targets.remove(rng.random_range(0..targets.len()));
        }
        while targets.len() < degree {
            let free: Vec<NodeId> = (0..NODES as NodeId)
                .filter(|&j| j != node && !targets.contains(&j))
                .collect();
            targets.push(free[rng.random_range(0..free.len())]);
        }
        edges.retain(|&(i, _)| i != node);
        edges.extend(targets.into_iter().map(|j| (node, j)));
    }

    if !COMPROMISED.iter().any(|&j| edges.contains(&(9, j))) {
        edges.insert((9, COMPROMISED[rng.random_range(0..COMPROMISED.len())]));
    }

    let nodes = base
        .nodes()
        .iter()
        .map(|n| {
            let epsilon = if RESILIENT.contains(&n.id) {
                0.9 + 0.1 * rng.random::<f64>()
            } else if VULNERABLE.contains(&n.id) || COMPROMISED.contains(&n.id) {
                0.3 * rng.random::<f64>()
            } else if n.id == 17 {
                0.7 + 0.3 * rng.random::<f64>()
            } else {
                n.epsilon
            };
            EcuNode::new(n.id, n.label.clone(), epsilon)
        })
        .collect();
    let graph = DependencyGraph::new(nodes, edges.into_iter().collect())?;

    let scenario = ScenarioSpec::seeded_truth(&graph, 10.0, 100.0, seed)
        .with_noise(0.01)
        .with_attack(AttackSpec::new(COMPROMISED, AttackMode::Both, 5.0));
    Ok((graph, scenario))
}

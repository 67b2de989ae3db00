//! Network state at one instant, and the scenarios that produce it.
//!
//! `observed[i]` is what ECU `i` reports for itself; `inferred[(i, j)]` is
//! what ECU `j` computes `i`'s value should be, for each dependency edge
//! `i -> j`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{expect_header, parse_field, significant_lines, DependencyGraph, NodeId};

pub const SNAPSHOT_HEADER: &str = "trustconnect-snapshot v1";
pub const SCENARIO_HEADER: &str = "trustconnect-scenario v1";

/// ChaCha stream used for ground-truth draws; noise uses stream 0.
const TRUTH_STREAM: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub observed: BTreeMap<NodeId, f64>,
    pub inferred: BTreeMap<(NodeId, NodeId), f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackMode {
    /// The compromised ECU lies about its own value.
    SelfInjection,
    /// The compromised ECU lies in what it infers for the ECUs depending on it.
    InferenceCorruption,
    Both,
}

impl AttackMode {
    pub fn injects_self(self) -> bool {
        matches!(self, AttackMode::SelfInjection | AttackMode::Both)
    }

    pub fn corrupts_inference(self) -> bool {
        matches!(self, AttackMode::InferenceCorruption | AttackMode::Both)
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::SelfInjection => "self-injection",
            AttackMode::InferenceCorruption => "inference-corruption",
            AttackMode::Both => "both",
        })
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self-injection" => Ok(AttackMode::SelfInjection),
            "inference-corruption" => Ok(AttackMode::InferenceCorruption),
            "both" => Ok(AttackMode::Both),
            other => Err(Error::param(
                "attack_mode",
                format!("{other:?} is not one of self-injection, inference-corruption, both"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub compromised: BTreeSet<NodeId>,
    pub mode: AttackMode,
    /// Offset added to every corrupted value.
    pub delta: f64,
}

impl AttackSpec {
    pub fn new(compromised: impl IntoIterator<Item = NodeId>, mode: AttackMode, delta: f64) -> Self {
        Self {
            compromised: compromised.into_iter().collect(),
            mode,
            delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub ground_truth: BTreeMap<NodeId, f64>,
    /// Standard deviation of honest inference noise.
    pub noise_sigma: f64,
    pub attack: Option<AttackSpec>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Clean, noise-free scenario whose ground truth is drawn uniformly from
    /// `[low, high)` for every node, in id order.
    pub fn seeded_truth(graph: &DependencyGraph, low: f64, high: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(TRUTH_STREAM);
        let ground_truth = graph
            .nodes()
            .iter()
            .map(|n| (n.id, low + (high - low) * rng.random::<f64>()))
            .collect();
        Self {
            ground_truth,
            noise_sigma: 0.0,
            attack: None,
            seed,
        }
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn with_attack(mut self, attack: AttackSpec) -> Self {
        self.attack = Some(attack);
        self
    }

    pub fn check(&self, graph: &DependencyGraph) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param(
                "noise_sigma",
                format!("{} must be finite and non-negative", self.noise_sigma),
            ));
        }
        if let Some(&id) = self.ground_truth.keys().find(|&&id| graph.node(id).is_none()) {
            return Err(Error::UnknownNode(id));
        }
        if let Some(node) = graph
            .nodes()
            .iter()
            .find(|n| !self.ground_truth.contains_key(&n.id))
        {
            return Err(Error::param(
                "ground_truth",
                format!("no value for node {}", node.id),
            ));
        }
        if let Some(attack) = &self.attack {
            if !(attack.delta >= 0.0 && attack.delta.is_finite()) {
                return Err(Error::param(
                    "delta",
                    format!("{} must be finite and non-negative", attack.delta),
                ));
            }
            if let Some(&id) = attack.compromised.iter().find(|&&id| graph.node(id).is_none()) {
                return Err(Error::UnknownNode(id));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{SCENARIO_HEADER}");
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "noise-sigma {}", self.noise_sigma);
        if let Some(a) = &self.attack {
            let ids: Vec<String> = a.compromised.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "attack {} {} {}", a.mode, a.delta, ids.join(","));
        }
        for (id, v) in &self.ground_truth {
            let _ = writeln!(s, "truth {id} {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = significant_lines(text);
        expect_header(&mut lines, SCENARIO_HEADER)?;
        let mut seed = None;
        let mut noise_sigma = None;
        let mut attack = None;
        let mut ground_truth = BTreeMap::new();
        for (n, line) in lines {
            let mut fields = line.split_whitespace();
            match fields.next().unwrap_or_default() {
                "seed" => seed = Some(parse_field(n, "seed", fields.next())?),
                "noise-sigma" => noise_sigma = Some(parse_field(n, "noise-sigma", fields.next())?),
                "attack" => {
                    let mode: String = parse_field(n, "attack mode", fields.next())?;
                    let mode = mode.parse().map_err(|e: Error| Error::parse(n, e.to_string()))?;
                    let delta = parse_field(n, "delta", fields.next())?;
                    let ids = parse_id_list(n, fields.next().unwrap_or(""))?;
                    attack = Some(AttackSpec::new(ids, mode, delta));
                }
                "truth" => {
                    let id: NodeId = parse_field(n, "node id", fields.next())?;
                    let v = parse_field(n, "truth value", fields.next())?;
                    if ground_truth.insert(id, v).is_some() {
                        return Err(Error::parse(n, format!("duplicate truth for node {id}")));
                    }
                }
                other => return Err(Error::parse(n, format!("unknown record {other:?}"))),
            }
            if let Some(extra) = fields.next() {
                return Err(Error::parse(n, format!("unexpected trailing field {extra:?}")));
            }
        }
        Ok(Self {
            ground_truth,
            noise_sigma: noise_sigma.unwrap_or(0.0),
            attack,
            seed: seed.ok_or_else(|| Error::parse(0, "missing `seed` record"))?,
        })
    }
}

/// Parses a comma separated id list; the empty string is the empty list.
pub fn parse_id_list(line: usize, s: &str) -> Result<Vec<NodeId>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_field(line, "node id", Some(t.trim())))
        .collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioSpec::from_text(&text)
}

pub fn save_scenario(scenario: &ScenarioSpec, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenario.to_text()).map_err(|e| Error::io(path, e))
}

/// Realizes a scenario on a graph.
///
/// Noise is drawn from one seeded stream, one sample per edge in canonical
/// edge order, and only when `noise_sigma > 0`.
pub fn synthesize_snapshot(graph: &DependencyGraph, scenario: &ScenarioSpec) -> Result<Snapshot> {
    graph.ensure_valid()?;
    scenario.check(graph)?;
    let truth = |id: NodeId| scenario.ground_truth[&id];
    let (self_injected, corrupting, delta) = match &scenario.attack {
        Some(a) => (
            a.mode.injects_self().then_some(&a.compromised),
            a.mode.corrupts_inference().then_some(&a.compromised),
            a.delta,
        ),
        None => (None, None, 0.0),
    };
    let hit = |set: Option<&BTreeSet<NodeId>>, id: NodeId| set.is_some_and(|s| s.contains(&id));

    let observed = graph
        .nodes()
        .iter()
        .map(|n| {
            let v = truth(n.id);
            (n.id, if hit(self_injected, n.id) { v + delta } else { v })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = (scenario.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, scenario.noise_sigma).expect("sigma checked"));
    let mut edges: Vec<(NodeId, NodeId)> = graph.edges().to_vec();
    edges.sort_unstable();
    let inferred = edges
        .into_iter()
        .map(|(i, j)| {
            let mut v = truth(i);
            if let Some(dist) = &noise {
                v += dist.sample(&mut rng);
            }
            if hit(corrupting, j) {
                v += delta;
            }
            ((i, j), v)
        })
        .collect();
    Ok(Snapshot { observed, inferred })
}

impl Snapshot {
    /// Zero-deviation snapshot: every inference equals the observed value.
    pub fn consistent(graph: &DependencyGraph, values: impl Fn(NodeId) -> f64) -> Self {
        Self {
            observed: graph.nodes().iter().map(|n| (n.id, values(n.id))).collect(),
            inferred: graph.edges().iter().map(|&(i, j)| ((i, j), values(i))).collect(),
        }
    }

    /// Checks that the snapshot covers exactly the graph's nodes and edges.
    /// The first problem in canonical order is reported.
    pub fn check_complete(&self, graph: &DependencyGraph) -> Result<()> {
        for node in graph.nodes() {
            if !self.observed.contains_key(&node.id) {
                return Err(Error::MissingObserved(node.id));
            }
        }
        if let Some(&id) = self.observed.keys().find(|&&id| graph.node(id).is_none()) {
            return Err(Error::UnknownNode(id));
        }
        let mut edges = graph.edges().to_vec();
        edges.sort_unstable();
        for (i, j) in edges {
            if !self.inferred.contains_key(&(i, j)) {
                return Err(Error::MissingInferred(i, j));
            }
        }
        if let Some(&(i, j)) = self.inferred.keys().find(|&&(i, j)| !graph.contains_edge(i, j)) {
            return Err(Error::UnexpectedInferred(i, j));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{SNAPSHOT_HEADER}");
        for (id, v) in &self.observed {
            let _ = writeln!(s, "obs {id} {v}");
        }
        for ((i, j), v) in &self.inferred {
            let _ = writeln!(s, "inf {i} {j} {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = significant_lines(text);
        expect_header(&mut lines, SNAPSHOT_HEADER)?;
        let mut snap = Snapshot::default();
        for (n, line) in lines {
            let mut fields = line.split_whitespace();
            match fields.next().unwrap_or_default() {
                "obs" => {
                    let id: NodeId = parse_field(n, "node id", fields.next())?;
                    let v = parse_field(n, "value", fields.next())?;
                    if snap.observed.insert(id, v).is_some() {
                        return Err(Error::parse(n, format!("duplicate obs for node {id}")));
                    }
                }
                "inf" => {
                    let i: NodeId = parse_field(n, "edge source", fields.next())?;
                    let j: NodeId = parse_field(n, "edge target", fields.next())?;
                    let v = parse_field(n, "value", fields.next())?;
                    if snap.inferred.insert((i, j), v).is_some() {
                        return Err(Error::parse(n, format!("duplicate inf for edge ({i}, {j})")));
                    }
                }
                other => return Err(Error::parse(n, format!("unknown record {other:?}"))),
            }
            if let Some(extra) = fields.next() {
                return Err(Error::parse(n, format!("unexpected trailing field {extra:?}")));
            }
        }
        Ok(snap)
    }
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Snapshot::from_text(&text)
}

pub fn save_snapshot(snapshot: &Snapshot, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, snapshot.to_text()).map_err(|e| Error::io(path, e))
}

/// `|observed[i] - inferred[(i, j)]|` for every edge.
pub fn deviations(
    graph: &DependencyGraph,
    snapshot: &Snapshot,
) -> Result<BTreeMap<(NodeId, NodeId), f64>> {
    snapshot.check_complete(graph)?;
    Ok(graph
        .edges()
        .iter()
        .map(|&(i, j)| ((i, j), (snapshot.observed[&i] - snapshot.inferred[&(i, j)]).abs()))
        .collect())
}

/// Deviations laid out like the graph's out-adjacency: `result[a][k]` is the
/// deviation of node index `a` against its `k`-th out-neighbour.
pub(crate) fn deviation_rows(graph: &DependencyGraph, snapshot: &Snapshot) -> Result<Vec<Vec<f64>>> {
    snapshot.check_complete(graph)?;
    let nodes = graph.nodes();
    Ok((0..nodes.len())
        .map(|a| {
            let i = nodes[a].id;
            let own = snapshot.observed[&i];
            graph
                .out_indices(a)
                .iter()
                .map(|&b| (own - snapshot.inferred[&(i, nodes[b].id)]).abs())
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_random, EcuNode, EpsilonDistribution};

    fn pair(i: NodeId, j: NodeId, obs: f64, inf: f64) -> (DependencyGraph, Snapshot) {
        let g = DependencyGraph::new(
            vec![EcuNode::labelled(i, 0.5), EcuNode::labelled(j, 0.5)],
            vec![(i, j)],
        )
        .unwrap();
        let snap = Snapshot {
            observed: [(i, obs), (j, 0.0)].into(),
            inferred: [((i, j), inf)].into(),
        };
        (g, snap)
    }

    #[test]
    fn deviation_examples() {
        for (obs, inf, want) in [(5.0, 5.0, 0.0), (5.0, 3.5, 1.5), (3.5, 5.0, 1.5)] {
            let (g, s) = pair(0, 1, obs, inf);
            assert_eq!(deviations(&g, &s).unwrap()[&(0, 1)], want);
        }
    }

    fn random_graph() -> DependencyGraph {
        generate_random(20, 0.2, EpsilonDistribution::default(), 11).unwrap()
    }

    #[test]
    fn clean_zero_noise_has_zero_deviation() {
        let g = random_graph();
        let sc = ScenarioSpec::seeded_truth(&g, 10.0, 100.0, 5);
        let snap = synthesize_snapshot(&g, &sc).unwrap();
        for (&(i, _), &v) in &snap.inferred {
            assert_eq!(v, snap.observed[&i]);
        }
        assert!(deviations(&g, &snap).unwrap().values().all(|&d| d == 0.0));
    }

    #[test]
    fn self_injection_hits_only_out_edges() {
        let g = random_graph();
        let sc = ScenarioSpec::seeded_truth(&g, 10.0, 100.0, 5)
            .with_attack(AttackSpec::new([4], AttackMode::SelfInjection, 2.0));
        let snap = synthesize_snapshot(&g, &sc).unwrap();
        assert_eq!(snap.observed[&4], sc.ground_truth[&4] + 2.0);
        assert!(g.out_degree(4).unwrap() > 0);
        for ((i, _), d) in deviations(&g, &snap).unwrap() {
            if i == 4 {
                // values are in [10, 100); adding 2.0 and subtracting is exact to 1 ulp
                assert!((d - 2.0).abs() < 1e-12, "{d}");
            } else {
                assert_eq!(d, 0.0);
            }
        }
    }

    #[test]
    fn inference_corruption_hits_only_in_edges() {
        let g = random_graph();
        let sc = ScenarioSpec::seeded_truth(&g, 10.0, 100.0, 5)
            .with_attack(AttackSpec::new([7], AttackMode::InferenceCorruption, 1.0));
        let snap = synthesize_snapshot(&g, &sc).unwrap();
        let mut hits = 0;
        for ((_, j), d) in deviations(&g, &snap).unwrap() {
            if j == 7 {
                hits += 1;
                assert!((d - 1.0).abs() < 1e-12, "{d}");
            } else {
                assert_eq!(d, 0.0);
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let g = random_graph();
        let sc = ScenarioSpec::seeded_truth(&g, 0.0, 1.0, 9)
            .with_noise(0.3)
            .with_attack(AttackSpec::new([1, 2], AttackMode::Both, 0.5));
        let a = synthesize_snapshot(&g, &sc).unwrap();
        let b = synthesize_snapshot(&g, &sc).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn scenario_rejects_unknown_nodes() {
        let g = random_graph();
        let sc = ScenarioSpec::seeded_truth(&g, 0.0, 1.0, 9)
            .with_attack(AttackSpec::new([42], AttackMode::Both, 0.5));
        assert!(matches!(synthesize_snapshot(&g, &sc), Err(Error::UnknownNode(42))));
        let mut sc = ScenarioSpec::seeded_truth(&g, 0.0, 1.0, 9);
        sc.ground_truth.insert(77, 1.0);
        assert!(matches!(synthesize_snapshot(&g, &sc), Err(Error::UnknownNode(77))));
        let bad = ScenarioSpec::seeded_truth(&g, 0.0, 1.0, 9).with_noise(-1.0);
        assert!(synthesize_snapshot(&g, &bad).is_err());
    }

    #[test]
    fn missing_inferred_named() {
        let g = random_graph();
        let mut snap = synthesize_snapshot(&g, &ScenarioSpec::seeded_truth(&g, 0.0, 1.0, 1)).unwrap();
        let victim = g.edges()[3];
        snap.inferred.remove(&victim);
        let err = snap.check_complete(&g).unwrap_err();
        assert!(matches!(err, Error::MissingInferred(i, j) if (i, j) == victim));
        assert!(err.to_string().contains(&format!("({}, {})", victim.0, victim.1)));
    }

    #[test]
    fn text_round_trip() {
        let g = random_graph();
        let sc = ScenarioSpec::seeded_truth(&g, -5.0, 5.0, 3).with_noise(0.7);
        let snap = synthesize_snapshot(&g, &sc).unwrap();
        assert_eq!(Snapshot::from_text(&snap.to_text()).unwrap(), snap);

        let sc = sc.with_attack(AttackSpec::new([0, 3], AttackMode::InferenceCorruption, 2.5));
        assert_eq!(ScenarioSpec::from_text(&sc.to_text()).unwrap(), sc);
    }

    #[test]
    fn hand_written_snapshot_matches() {
        let text = "trustconnect-snapshot v1\n# external\nobs 0 5\nobs 1 0\ninf 0 1 3.5\n";
        let (g, s) = pair(0, 1, 5.0, 3.5);
        let parsed = Snapshot::from_text(text).unwrap();
        assert_eq!(parsed, s);
        parsed.check_complete(&g).unwrap();
    }
}

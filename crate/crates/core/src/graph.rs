//! ECU dependency graph.
//!
//! An edge `(i, j)` means ECU `i` depends on ECU `j`: `j` can infer what
//! `i`'s value should be. Every node carries a resilience `epsilon` in
//! `[0, 1]`, where 1 means the ECU is hard to reach by remote injection.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type NodeId = u32;

pub const GRAPH_HEADER: &str = "trustconnect-graph v1";

/// Default edge probability of the random generator.
pub const DEFAULT_EDGE_PROBABILITY: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcuNode {
    pub id: NodeId,
    pub label: String,
    pub epsilon: f64,
}

impl EcuNode {
    pub fn new(id: NodeId, label: impl Into<String>, epsilon: f64) -> Self {
        Self {
            id,
            label: label.into(),
            epsilon,
        }
    }

    /// Node labelled `E<id>`.
    pub fn labelled(id: NodeId, epsilon: f64) -> Self {
        Self::new(id, format!("E{id}"), epsilon)
    }
}

/// A single broken graph invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNodeId(NodeId),
    EpsilonOutOfRange { node: NodeId, epsilon: f64 },
    InvalidLabel { node: NodeId, label: String },
    SelfLoop(NodeId),
    DuplicateEdge(NodeId, NodeId),
    DanglingEdge { from: NodeId, to: NodeId, missing: NodeId },
}

impl Violation {
    fn sort_key(&self) -> (u8, NodeId, NodeId, u8) {
        match *self {
            Violation::DuplicateNodeId(id) => (0, id, 0, 0),
            Violation::EpsilonOutOfRange { node, .. } => (0, node, 0, 1),
            Violation::InvalidLabel { node, .. } => (0, node, 0, 2),
            Violation::SelfLoop(n) => (1, n, n, 0),
            Violation::DuplicateEdge(i, j) => (1, i, j, 1),
            Violation::DanglingEdge { from, to, .. } => (1, from, to, 2),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "duplicate node id {id}"),
            Violation::EpsilonOutOfRange { node, epsilon } => {
                write!(f, "epsilon out of range at node {node}: {epsilon}")
            }
            Violation::InvalidLabel { node, label } => {
                write!(f, "invalid label {label:?} at node {node}")
            }
            Violation::SelfLoop(n) => write!(f, "self-loop at node {n}"),
            Violation::DuplicateEdge(i, j) => write!(f, "duplicate edge ({i}, {j})"),
            Violation::DanglingEdge { from, to, missing } => {
                write!(f, "edge ({from}, {to}) references missing node {missing}")
            }
        }
    }
}

fn label_ok(label: &str) -> bool {
    !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || c == ',' || c == '#' || c == '"')
}

/// Directed dependency graph over ECUs.
///
/// Graphs built with [`DependencyGraph::new`] are valid and canonical (nodes
/// ascending by id, edges lexicographic). [`DependencyGraph::from_parts`]
/// keeps the parts verbatim so broken inputs can be inspected with
/// [`DependencyGraph::validate`].
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    nodes: Vec<EcuNode>,
    edges: Vec<(NodeId, NodeId)>,
    index: HashMap<NodeId, usize>,
    // out-neighbour node indices, ascending by id
    out: Vec<Vec<usize>>,
}

impl PartialEq for DependencyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl DependencyGraph {
    pub fn from_parts(nodes: Vec<EcuNode>, edges: Vec<(NodeId, NodeId)>) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (idx, node) in nodes.iter().enumerate() {
            index.entry(node.id).or_insert(idx);
        }
        let mut out = vec![Vec::new(); nodes.len()];
        for &(i, j) in &edges {
            if let (Some(&a), Some(&b)) = (index.get(&i), index.get(&j)) {
                out[a].push(b);
            }
        }
        for list in &mut out {
            list.sort_by_key(|&b| nodes[b].id);
            list.dedup();
        }
        Self {
            nodes,
            edges,
            index,
            out,
        }
    }

    /// Builds a canonical graph, rejecting any invariant violation.
    pub fn new(mut nodes: Vec<EcuNode>, mut edges: Vec<(NodeId, NodeId)>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        edges.sort_unstable();
        let graph = Self::from_parts(nodes, edges);
        let violations = graph.validate();
        if violations.is_empty() {
            Ok(graph)
        } else {
            Err(Error::InvalidGraph(violations))
        }
    }

    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), Vec::new())
    }

    /// Every invariant violation, ordered by node id then by edge.
    pub fn validate(&self) -> Vec<Violation> {
        let mut found = Vec::new();
        let mut seen = HashMap::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if seen.insert(node.id, ()).is_some() {
                found.push(Violation::DuplicateNodeId(node.id));
            }
            if !(0.0..=1.0).contains(&node.epsilon) {
                found.push(Violation::EpsilonOutOfRange {
                    node: node.id,
                    epsilon: node.epsilon,
                });
            }
            if !label_ok(&node.label) {
                found.push(Violation::InvalidLabel {
                    node: node.id,
                    label: node.label.clone(),
                });
            }
        }
        let mut edge_seen = BTreeSet::new();
        for &(i, j) in &self.edges {
            if i == j {
                found.push(Violation::SelfLoop(i));
            } else if !edge_seen.insert((i, j)) {
                found.push(Violation::DuplicateEdge(i, j));
            }
            for missing in [i, j] {
                if !self.index.contains_key(&missing) {
                    found.push(Violation::DanglingEdge {
                        from: i,
                        to: j,
                        missing,
                    });
                    break;
                }
            }
        }
        found.sort_by_key(Violation::sort_key);
        found.dedup();
        found
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(violations))
        }
    }

    pub fn nodes(&self) -> &[EcuNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&EcuNode> {
        self.index_of(id).map(|idx| &self.nodes[idx])
    }

    pub fn contains_edge(&self, i: NodeId, j: NodeId) -> bool {
        match (self.index_of(i), self.index_of(j)) {
            (Some(a), Some(b)) => self.out[a].contains(&b),
            _ => false,
        }
    }

    /// Out-neighbours of `id`, ascending.
    pub fn out_neighbors(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let idx = self.index_of(id).ok_or(Error::UnknownNode(id))?;
        Ok(self.out[idx].iter().map(|&b| self.nodes[b].id).collect())
    }

    pub fn out_degree(&self, id: NodeId) -> Result<usize> {
        let idx = self.index_of(id).ok_or(Error::UnknownNode(id))?;
        Ok(self.out[idx].len())
    }

    pub(crate) fn out_indices(&self, idx: usize) -> &[usize] {
        &self.out[idx]
    }

    /// Canonical text form; byte-identical for equal graphs.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{GRAPH_HEADER}");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            let _ = writeln!(s, "node {} {} {}", n.id, n.label, n.epsilon);
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for (i, j) in &self.edges {
            let _ = writeln!(s, "edge {i} {j}");
        }
        s
    }

    /// Parses the text form, then validates it.
    pub fn from_text(text: &str) -> Result<Self> {
        parse_graph(text)
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Strips comments and blank lines, yielding `(line_number, content)`.
pub(crate) fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(n, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((n + 1, content))
    })
}

pub(crate) fn parse_field<T: FromStr>(line: usize, field: &str, value: Option<&str>) -> Result<T> {
    let value = value.ok_or_else(|| Error::parse(line, format!("missing field `{field}`")))?;
    value
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid {field} {value:?}")))
}

pub(crate) fn expect_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    header: &str,
) -> Result<()> {
    match lines.next() {
        Some((_, h)) if h == header => Ok(()),
        Some((n, h)) => Err(Error::parse(n, format!("expected header {header:?}, found {h:?}"))),
        None => Err(Error::parse(0, format!("empty document, expected header {header:?}"))),
    }
}

fn parse_graph(text: &str) -> Result<DependencyGraph> {
    #[derive(PartialEq)]
    enum Section {
        Start,
        Nodes,
        Edges,
    }
    let mut lines = significant_lines(text);
    expect_header(&mut lines, GRAPH_HEADER)?;

    let mut section = Section::Start;
    let mut declared_nodes = None;
    let mut declared_edges = None;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (n, line) in lines {
        let mut fields = line.split_whitespace();
        let keyword = fields.next().unwrap_or_default();
        match keyword {
            "nodes" if section == Section::Start => {
                declared_nodes = Some(parse_field::<usize>(n, "node count", fields.next())?);
                section = Section::Nodes;
            }
            "edges" if section == Section::Nodes => {
                declared_edges = Some(parse_field::<usize>(n, "edge count", fields.next())?);
                section = Section::Edges;
            }
            "node" if section == Section::Nodes => {
                let id = parse_field(n, "node id", fields.next())?;
                let label: String = parse_field(n, "label", fields.next())?;
                let epsilon = parse_field(n, "epsilon", fields.next())?;
                nodes.push(EcuNode::new(id, label, epsilon));
            }
            "edge" if section == Section::Edges => {
                let i = parse_field(n, "edge source", fields.next())?;
                let j = parse_field(n, "edge target", fields.next())?;
                edges.push((i, j));
            }
            "nodes" | "edges" | "node" | "edge" => {
                return Err(Error::parse(n, format!("`{keyword}` record out of order")));
            }
            other => return Err(Error::parse(n, format!("unknown record {other:?}"))),
        }
        if let Some(extra) = fields.next() {
            return Err(Error::parse(n, format!("unexpected trailing field {extra:?}")));
        }
    }
    let declared_nodes =
        declared_nodes.ok_or_else(|| Error::parse(0, "missing `nodes` section"))?;
    let declared_edges =
        declared_edges.ok_or_else(|| Error::parse(0, "missing `edges` section"))?;
    if declared_nodes != nodes.len() {
        return Err(Error::parse(
            0,
            format!("`nodes` declares {declared_nodes} records, found {}", nodes.len()),
        ));
    }
    if declared_edges != edges.len() {
        return Err(Error::parse(
            0,
            format!("`edges` declares {declared_edges} records, found {}", edges.len()),
        ));
    }
    DependencyGraph::new(nodes, edges)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<DependencyGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DependencyGraph::from_text(&text)
}

pub fn save_graph(graph: &DependencyGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, graph.to_text()).map_err(|e| Error::io(path, e))
}

/// How node resilience values are drawn by [`generate_random`].
///
/// Text form: `uniform`, `uniform(lo,hi)`, `constant(v)` or `beta(a,b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsilonDistribution {
    Uniform { low: f64, high: f64 },
    Constant(f64),
    Beta { a: f64, b: f64 },
}

impl Default for EpsilonDistribution {
    fn default() -> Self {
        EpsilonDistribution::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

impl EpsilonDistribution {
    fn check(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            EpsilonDistribution::Uniform { low, high } if unit(low) && unit(high) && low <= high => {
                Ok(())
            }
            EpsilonDistribution::Constant(v) if unit(v) => Ok(()),
            EpsilonDistribution::Beta { a, b } if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() => {
                Ok(())
            }
            _ => Err(Error::param(
                "epsilon_distribution",
                format!("{self} does not produce values in [0, 1]"),
            )),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            EpsilonDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            EpsilonDistribution::Constant(v) => v,
            EpsilonDistribution::Beta { a, b } => Beta::new(a, b)
                .expect("parameters checked")
                .sample(rng)
                .clamp(0.0, 1.0),
        }
    }
}

impl fmt::Display for EpsilonDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonDistribution::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            EpsilonDistribution::Constant(v) => write!(f, "constant({v})"),
            EpsilonDistribution::Beta { a, b } => write!(f, "beta({a},{b})"),
        }
    }
}

impl FromStr for EpsilonDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("epsilon_distribution", format!("cannot parse {s:?}"));
        let s = s.trim();
        if s == "uniform" {
            return Ok(Self::default());
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<f64> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let dist = match (name.trim(), args.as_slice()) {
            ("uniform", &[low, high]) => EpsilonDistribution::Uniform { low, high },
            ("constant", &[v]) => EpsilonDistribution::Constant(v),
            ("beta", &[a, b]) => EpsilonDistribution::Beta { a, b },
            _ => return Err(bad()),
        };
        dist.check()?;
        Ok(dist)
    }
}

/// Seeded directed random graph with independent edges.
///
/// One ChaCha8 stream is consumed in a fixed order: first one resilience
/// draw per node in id order, then one uniform draw per ordered pair
/// `(i, j)`, `i != j`, visited with `i` then `j` ascending. The pair becomes
/// an edge when its draw is below `edge_probability`.
pub fn generate_random(
    n: usize,
    edge_probability: f64,
    epsilon_distribution: EpsilonDistribution,
    seed: u64,
) -> Result<DependencyGraph> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if n > NodeId::MAX as usize {
        return Err(Error::param("n", format!("must be at most {}", NodeId::MAX)));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::param(
            "edge_probability",
            format!("{edge_probability} is outside [0, 1]"),
        ));
    }
    epsilon_distribution.check()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<EcuNode> = (0..n as NodeId)
        .map(|id| EcuNode::labelled(id, epsilon_distribution.sample(&mut rng)))
        .collect();
    let mut edges = Vec::new();
    for i in 0..n as NodeId {
        for j in 0..n as NodeId {
            if i != j && rng.random::<f64>() < edge_probability {
                edges.push((i, j));
            }
        }
    }
    DependencyGraph::new(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_complete() -> DependencyGraph {
        let nodes = (0..3).map(|i| EcuNode::labelled(i, 0.5)).collect();
        let edges = vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
        DependencyGraph::new(nodes, edges).unwrap()
    }

    #[test]
    fn empty_graph_is_valid() {
        assert!(DependencyGraph::empty().validate().is_empty());
    }

    #[test]
    fn self_loop_reported() {
        let g = DependencyGraph::from_parts(vec![EcuNode::labelled(3, 0.5)], vec![(3, 3)]);
        let v: Vec<String> = g.validate().iter().map(ToString::to_string).collect();
        assert_eq!(v, vec!["self-loop at node 3"]);
    }

    #[test]
    fn dangling_edge_reported_once() {
        let g = DependencyGraph::from_parts(vec![EcuNode::labelled(0, 0.5)], vec![(0, 99)]);
        assert_eq!(
            g.validate(),
            vec![Violation::DanglingEdge {
                from: 0,
                to: 99,
                missing: 99
            }]
        );
    }

    #[test]
    fn violations_are_ordered() {
        let g = DependencyGraph::from_parts(
            vec![
                EcuNode::labelled(2, 1.5),
                EcuNode::labelled(1, 0.5),
                EcuNode::labelled(1, -0.1),
            ],
            vec![(2, 1), (1, 1), (2, 1), (0, 5)],
        );
        let v = g.validate();
        assert_eq!(
            v,
            vec![
                Violation::DuplicateNodeId(1),
                Violation::EpsilonOutOfRange { node: 1, epsilon: -0.1 },
                Violation::EpsilonOutOfRange { node: 2, epsilon: 1.5 },
                Violation::DanglingEdge { from: 0, to: 5, missing: 0 },
                Violation::SelfLoop(1),
                Violation::DuplicateEdge(2, 1),
            ]
        );
    }

    #[test]
    fn out_neighbors_ascending() {
        let g = three_complete();
        assert_eq!(g.out_neighbors(0).unwrap(), vec![1, 2]);
        let lone = DependencyGraph::new(vec![EcuNode::labelled(0, 0.1)], vec![]).unwrap();
        assert!(lone.out_neighbors(0).unwrap().is_empty());
        assert!(matches!(g.out_neighbors(7), Err(Error::UnknownNode(7))));
    }

    #[test]
    fn generate_extremes() {
        let g = generate_random(1, 0.7, EpsilonDistribution::default(), 3).unwrap();
        assert_eq!((g.len(), g.edge_count()), (1, 0));
        let g = generate_random(20, 1.0, EpsilonDistribution::default(), 7).unwrap();
        assert_eq!(g.edge_count(), 380);
        let g = generate_random(20, 0.0, EpsilonDistribution::default(), 7).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn generate_rejects_bad_probability() {
        for p in [-0.1, 1.5, f64::NAN] {
            assert!(generate_random(5, p, EpsilonDistribution::default(), 1).is_err());
        }
        assert!(generate_random(0, 0.5, EpsilonDistribution::default(), 1).is_err());
    }

    #[test]
    fn distribution_text_round_trip() {
        for s in ["uniform(0,1)", "constant(0.25)", "beta(2,5)", "uniform(0.2,0.8)"] {
            let d: EpsilonDistribution = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!("uniform".parse::<EpsilonDistribution>().unwrap(), EpsilonDistribution::default());
        assert!("uniform(0,2)".parse::<EpsilonDistribution>().is_err());
        assert!("gauss(0,1)".parse::<EpsilonDistribution>().is_err());
    }

    #[test]
    fn missing_edges_section_is_named() {
        let text = "trustconnect-graph v1\nnodes 1\nnode 0 E0 0.5\n";
        let err = DependencyGraph::from_text(text).unwrap_err().to_string();
        assert!(err.contains("`edges`"), "{err}");
    }

    #[test]
    fn epsilon_out_of_range_on_load() {
        let text = "trustconnect-graph v1\nnodes 1\nnode 0 E0 1.5\nedges 0\n";
        let err = DependencyGraph::from_text(text).unwrap_err();
        assert!(matches!(err, Error::InvalidGraph(_)));
        assert!(err.to_string().contains("epsilon out of range"));
    }

    #[test]
    fn parse_error_has_line() {
        let text = "trustconnect-graph v1\n# c\nnodes 1\nnode 0 E0 abc\nedges 0\n";
        match DependencyGraph::from_text(text).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("epsilon"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = generate_random(12, 0.3, EpsilonDistribution::default(), 99).unwrap();
        let text = g.to_text();
        let back = DependencyGraph::from_text(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_text(), text);
        for (a, b) in g.nodes().iter().zip(back.nodes()) {
            assert_eq!(a.epsilon.to_bits(), b.epsilon.to_bits());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.txt");
        let g = three_complete();
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
        assert!(load_graph(dir.path().join("nope")).unwrap_err().is_io());
    }
}

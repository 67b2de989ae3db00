//! Trust scoring.
//!
//! For a dependency edge `i -> j` with deviation `d`, the neighbour weight is
//! `exp(-k * d)`. The trust of `i` sums, over its out-neighbours `j`,
//! `epsilon_j * alpha * C(j) + W(i, j)`, where `C(j)` is `j`'s own trust
//! score once one is available and the prior `c0` before that. The baseline
//! is the same computation with every deviation set to zero, and the
//! adjusted score blends baseline and trust by the node's own resilience.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DependencyGraph, NodeId};
use crate::snapshot::{deviation_rows, Snapshot};

pub const REPORT_HEADER: &str = "trustconnect-report v1";
pub const REPORT_CSV_HEADER: &str = "id,label,epsilon,btv,trust,eatv";

/// When a neighbour's trust score counts as "available".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EvalMode {
    /// One pass in ascending id order; neighbours already scored in this
    /// pass contribute their score, the rest contribute `c0`.
    #[default]
    SinglePass,
    /// Jacobi iteration from `c0` until the max-norm change drops below the
    /// tolerance.
    FixedPoint,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::SinglePass => "single-pass",
            EvalMode::FixedPoint => "fixed-point",
        })
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-pass" => Ok(EvalMode::SinglePass),
            "fixed-point" => Ok(EvalMode::FixedPoint),
            other => Err(Error::param(
                "mode",
                format!("{other:?} is not one of single-pass, fixed-point"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustParams {
    /// Decay of the neighbour weight with deviation.
    pub k: f64,
    /// Amplification of neighbour resilience.
    pub alpha: f64,
    /// Stand-in for a neighbour's trust before it has been scored.
    pub c0: f64,
    pub mode: EvalMode,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            k: 0.5,
            alpha: 0.1,
            c0: 1.0,
            mode: EvalMode::SinglePass,
            max_iterations: 100,
            tolerance: 1e-9,
        }
    }
}

impl TrustParams {
    pub fn new(k: f64, alpha: f64) -> Self {
        Self {
            k,
            alpha,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: EvalMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.k) {
            return Err(Error::param("k", format!("{} must be finite and >= 0", self.k)));
        }
        if !nonneg(self.alpha) {
            return Err(Error::param("alpha", format!("{} must be finite and >= 0", self.alpha)));
        }
        if !self.c0.is_finite() {
            return Err(Error::param("c0", format!("{} must be finite", self.c0)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::param(
                "tolerance",
                format!("{} must be finite and > 0", self.tolerance),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// `exp(-k * d)`; in `(0, 1]` for finite inputs.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn edge_weight(d: f64, k: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::param("d", format!("deviation {d} must be >= 0")));
    }
    if !(k >= 0.0) {
        return Err(Error::param("k", format!("{k} must be >= 0")));
    }
    Ok((-k * d).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustScores {
    /// `(id, score)` ascending by id.
    pub values: Vec<(NodeId, f64)>,
    pub convergence: Convergence,
}

impl TrustScores {
    pub fn get(&self, id: NodeId) -> Option<f64> {
        self.values
            .binary_search_by_key(&id, |&(i, _)| i)
            .ok()
            .map(|p| self.values[p].1)
    }
}

/// Weight rows aligned with the graph's out-adjacency.
pub(crate) fn weight_rows(deviations: &[Vec<f64>], k: f64) -> Vec<Vec<f64>> {
    deviations
        .iter()
        .map(|row| row.iter().map(|&d| (-k * d).exp()).collect())
        .collect()
}

/// Scores in node-index order.
pub(crate) fn evaluate(
    graph: &DependencyGraph,
    weights: &[Vec<f64>],
    params: &TrustParams,
) -> (Vec<f64>, Convergence) {
    let nodes = graph.nodes();
    let n = nodes.len();
    let eps: Vec<f64> = nodes.iter().map(|n| n.epsilon).collect();
    let row_sum = |a: usize, c: &dyn Fn(usize) -> f64| -> f64 {
        graph
            .out_indices(a)
            .iter()
            .zip(&weights[a])
            .fold(0.0, |acc, (&b, &w)| acc + (eps[b] * params.alpha * c(b) + w))
    };

    match params.mode {
        EvalMode::SinglePass => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&a| nodes[a].id);
            let mut scores = vec![0.0; n];
            let mut done = vec![false; n];
            for a in order {
                let t = row_sum(a, &|b| if done[b] { scores[b] } else { params.c0 });
                scores[a] = t;
                done[a] = true;
            }
            (
                scores,
                Convergence {
                    converged: true,
                    iterations: 1,
                },
            )
        }
        EvalMode::FixedPoint => {
            let mut prev = vec![params.c0; n];
            let mut convergence = Convergence {
                converged: false,
                iterations: 0,
            };
            for iter in 1..=params.max_iterations {
                let next: Vec<f64> = (0..n).map(|a| row_sum(a, &|b| prev[b])).collect();
                let change = next
                    .iter()
                    .zip(&prev)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0_f64, f64::max);
                let finite = next.iter().all(|v| v.is_finite());
                prev = next;
                convergence.iterations = iter;
                if !finite {
                    break;
                }
                if change < params.tolerance {
                    convergence.converged = true;
                    break;
                }
            }
            (prev, convergence)
        }
    }
}

fn to_scores(graph: &DependencyGraph, values: Vec<f64>, convergence: Convergence) -> TrustScores {
    let mut values: Vec<(NodeId, f64)> = graph.nodes().iter().map(|n| n.id).zip(values).collect();
    values.sort_by_key(|&(id, _)| id);
    TrustScores {
        values,
        convergence,
    }
}

fn zero_rows(graph: &DependencyGraph) -> Vec<Vec<f64>> {
    (0..graph.len())
        .map(|a| vec![0.0; graph.out_indices(a).len()])
        .collect()
}

/// Trust of every node given the snapshot's deviations.
///
/// A fixed-point run that hits `max_iterations` or blows up still returns
/// its last iterate; check `convergence`.
pub fn trust_scores(
    graph: &DependencyGraph,
    snapshot: &Snapshot,
    params: &TrustParams,
) -> Result<TrustScores> {
    graph.ensure_valid()?;
    params.validate()?;
    let rows = deviation_rows(graph, snapshot)?;
    let (values, conv) = evaluate(graph, &weight_rows(&rows, params.k), params);
    Ok(to_scores(graph, values, conv))
}

/// Trust with every deviation at zero, i.e. every weight exactly 1.
pub fn baseline_trust(graph: &DependencyGraph, params: &TrustParams) -> Result<TrustScores> {
    graph.ensure_valid()?;
    params.validate()?;
    let (values, conv) = evaluate(graph, &weight_rows(&zero_rows(graph), params.k), params);
    Ok(to_scores(graph, values, conv))
}

/// `btv - (btv - trust) * (1 - epsilon)`, evaluated in the equivalent form
/// `epsilon * btv + (1 - epsilon) * trust` so both endpoints are exact.
pub fn adjusted_trust(btv: f64, trust: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param("epsilon", format!("{epsilon} is outside [0, 1]")));
    }
    let blended = epsilon * btv + (1.0 - epsilon) * trust;
    Ok(blended.clamp(btv.min(trust), btv.max(trust)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTrust {
    pub id: NodeId,
    pub label: String,
    pub epsilon: f64,
    pub btv: f64,
    pub trust: f64,
    pub eatv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub graph_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub nodes: Vec<NodeTrust>,
    pub network_trust: f64,
    pub params: TrustParams,
    /// Convergence of the trust pass; the baseline pass is reported separately.
    pub convergence: Convergence,
    pub baseline_convergence: Convergence,
    pub provenance: Provenance,
}

/// Resilience-weighted mean of `min(T, BTV) / BTV`, with a ratio of 1 for
/// nodes whose baseline is not positive. Falls back to the plain mean when
/// every resilience is zero; an empty graph scores 1.
pub fn network_trust(nodes: &[NodeTrust]) -> f64 {
    if nodes.is_empty() {
        return 1.0;
    }
    let ratio = |n: &NodeTrust| {
        if n.btv > 0.0 {
            (n.trust.min(n.btv) / n.btv).clamp(0.0, 1.0)
        } else {
            1.0
        }
    };
    let total_eps: f64 = nodes.iter().map(|n| n.epsilon).sum();
    let value = if total_eps > 0.0 {
        nodes.iter().map(|n| n.epsilon * ratio(n)).sum::<f64>() / total_eps
    } else {
        nodes.iter().map(ratio).sum::<f64>() / nodes.len() as f64
    };
    value.clamp(0.0, 1.0)
}

pub fn full_report(
    graph: &DependencyGraph,
    snapshot: &Snapshot,
    params: &TrustParams,
) -> Result<TrustReport> {
    let rows = {
        graph.ensure_valid()?;
        params.validate()?;
        deviation_rows(graph, snapshot)?
    };
    Ok(report_from_deviations(graph, &rows, params, graph.content_hash()))
}

/// Assembles a report from precomputed deviation rows. Used by sweeps, where
/// the deviations are shared across every grid cell.
pub(crate) fn report_from_deviations(
    graph: &DependencyGraph,
    rows: &[Vec<f64>],
    params: &TrustParams,
    graph_hash: String,
) -> TrustReport {
    let (trust, convergence) = evaluate(graph, &weight_rows(rows, params.k), params);
    let (btv, baseline_convergence) =
        evaluate(graph, &weight_rows(&zero_rows(graph), params.k), params);
    let mut nodes: Vec<NodeTrust> = graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(a, n)| NodeTrust {
            id: n.id,
            label: n.label.clone(),
            epsilon: n.epsilon,
            btv: btv[a],
            trust: trust[a],
            eatv: adjusted_trust(btv[a], trust[a], n.epsilon).expect("graph validated"),
        })
        .collect();
    nodes.sort_by_key(|n| n.id);
    TrustReport {
        network_trust: network_trust(&nodes),
        nodes,
        params: *params,
        convergence,
        baseline_convergence,
        provenance: Provenance {
            seed: None,
            graph_hash,
        },
    }
}

impl TrustReport {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.provenance.seed = Some(seed);
        self
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeTrust> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_CSV_HEADER}");
        for n in &self.nodes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                n.id, n.label, n.epsilon, n.btv, n.trust, n.eatv
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_HEADER}");
        let _ = writeln!(s, "# node <id> <label> <epsilon> <btv> <trust> <eatv>");
        for n in &self.nodes {
            let _ = writeln!(
                s,
                "node {} {} {} {} {} {}",
                n.id, n.label, n.epsilon, n.btv, n.trust, n.eatv
            );
        }
        let _ = writeln!(s, "network_trust {}", self.network_trust);
        let _ = writeln!(
            s,
            "params k={} alpha={} c0={} mode={} max_iterations={} tolerance={}",
            p.k, p.alpha, p.c0, p.mode, p.max_iterations, p.tolerance
        );
        let _ = writeln!(
            s,
            "convergence converged={} iterations={} baseline_converged={} baseline_iterations={}",
            self.convergence.converged,
            self.convergence.iterations,
            self.baseline_convergence.converged,
            self.baseline_convergence.iterations
        );
        let seed = self
            .provenance
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        let _ = writeln!(s, "provenance seed={} graph={}", seed, self.provenance.graph_hash);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }
}

/// Reads rows written by [`TrustReport::to_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<NodeTrust>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == REPORT_CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header {REPORT_CSV_HEADER:?}"))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let n = n + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::parse(n, format!("expected 6 fields, found {}", f.len())));
            }
            let num = |idx: usize, name: &str| -> Result<f64> {
                f[idx]
                    .parse()
                    .map_err(|_| Error::parse(n, format!("invalid {name} {:?}", f[idx])))
            };
            Ok(NodeTrust {
                id: f[0]
                    .parse()
                    .map_err(|_| Error::parse(n, format!("invalid id {:?}", f[0])))?,
                label: f[1].to_string(),
                epsilon: num(2, "epsilon")?,
                btv: num(3, "btv")?,
                trust: num(4, "trust")?,
                eatv: num(5, "eatv")?,
            })
        })
        .collect()
}

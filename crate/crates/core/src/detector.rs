//! Contradiction-threshold anomaly detector.
//!
//! An edge `i -> j` contradicts `i` when its weight `exp(-k * d)` drops
//! below `weight_threshold`. A node's evidence is the summed resilience of
//! its contradicting neighbours, so testimony from ECUs that are easy to
//! attack counts for little. Nodes whose evidence reaches
//! `evidence_threshold` are flagged.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DependencyGraph, NodeId};
use crate::snapshot::{deviation_rows, Snapshot};
use crate::trust::{weight_rows, TrustParams};

pub const DETECTION_CSV_HEADER: &str = "id,evidence,flagged";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub weight_threshold: f64,
    pub evidence_threshold: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            weight_threshold: 0.5,
            evidence_threshold: 1.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight_threshold > 0.0 && self.weight_threshold < 1.0) {
            return Err(Error::param(
                "weight_threshold",
                format!("{} is outside (0, 1)", self.weight_threshold),
            ));
        }
        if !(self.evidence_threshold >= 0.0 && self.evidence_threshold.is_finite()) {
            return Err(Error::param(
                "evidence_threshold",
                format!("{} must be finite and >= 0", self.evidence_threshold),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDetection {
    pub id: NodeId,
    pub evidence: f64,
    pub flagged: bool,
    pub contradicting_neighbors: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Ascending by id.
    pub nodes: Vec<NodeDetection>,
    /// Node ids by descending evidence, ties by ascending id.
    pub ranking: Vec<NodeId>,
    pub params: DetectorParams,
}

pub fn detect(
    graph: &DependencyGraph,
    snapshot: &Snapshot,
    trust_params: &TrustParams,
    det_params: &DetectorParams,
) -> Result<DetectionReport> {
    graph.ensure_valid()?;
    trust_params.validate()?;
    det_params.validate()?;
    let weights = weight_rows(&deviation_rows(graph, snapshot)?, trust_params.k);
    let nodes = graph.nodes();

    let mut out: Vec<NodeDetection> = nodes
        .iter()
        .enumerate()
        .map(|(a, node)| {
            let mut evidence = 0.0;
            let mut contradicting = Vec::new();
            for (&b, &w) in graph.out_indices(a).iter().zip(&weights[a]) {
                if w < det_params.weight_threshold {
                    evidence += nodes[b].epsilon;
                    contradicting.push(nodes[b].id);
                }
            }
            NodeDetection {
                id: node.id,
                evidence,
                flagged: evidence >= det_params.evidence_threshold,
                contradicting_neighbors: contradicting,
            }
        })
        .collect();
    out.sort_by_key(|n| n.id);

    let mut ranked: Vec<&NodeDetection> = out.iter().collect();
    ranked.sort_by(|x, y| match y.evidence.total_cmp(&x.evidence) {
        Ordering::Equal => x.id.cmp(&y.id),
        other => other,
    });
    let ranking = ranked.iter().map(|n| n.id).collect();

    Ok(DetectionReport {
        nodes: out,
        ranking,
        params: *det_params,
    })
}

impl DetectionReport {
    pub fn flagged(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.flagged).map(|n| n.id).collect()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeDetection> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{DETECTION_CSV_HEADER}\n");
        for n in &self.nodes {
            s.push_str(&format!("{},{},{}\n", n.id, n.evidence, n.flagged));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("trustconnect-detection v1\n");
        s.push_str(&format!(
            "params weight_threshold={} evidence_threshold={}\n",
            self.params.weight_threshold, self.params.evidence_threshold
        ));
        for (rank, id) in self.ranking.iter().enumerate() {
            let n = self.node(*id).expect("ranking covers nodes");
            let who: Vec<String> = n.contradicting_neighbors.iter().map(ToString::to_string).collect();
            s.push_str(&format!(
                "rank {} node {} evidence {} flagged {} contradicted-by [{}]\n",
                rank + 1,
                n.id,
                n.evidence,
                n.flagged,
                who.join(",")
            ));
        }
        let flagged: Vec<String> = self.flagged().iter().map(ToString::to_string).collect();
        s.push_str(&format!("flagged [{}]\n", flagged.join(",")));
        s
    }
}

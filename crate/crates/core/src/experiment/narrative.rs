//! Qualitative checks of a fixture sweep: resilient ECUs keep their adjusted
//! trust near baseline, vulnerable ones do not.

use serde::Serialize;

use super::fixture::{RESILIENT, VULNERABLE};
use super::SweepResult;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::trust::{NodeTrust, TrustReport};

const BOUND_SLACK: f64 = 1e-12;
const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderingCheck {
    Pass,
    Fail,
    /// One of the two groups has no trust drop at all.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub k: f64,
    pub alpha: f64,
    /// Every node satisfies `|EATV - BTV| <= (1 - eps) * |BTV - T| + 1e-12`.
    pub bound_holds: bool,
    pub ordering: OrderingCheck,
    /// `(id, |EATV - BTV| / max(BTV, 1e-12))` for the resilient then the
    /// vulnerable group.
    pub relative_gaps: Vec<(NodeId, f64)>,
}

impl CellCheck {
    pub fn passed(&self) -> bool {
        self.bound_holds && self.ordering != OrderingCheck::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NarrativeSummary {
    pub cells: Vec<CellCheck>,
}

impl NarrativeSummary {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(CellCheck::passed)
    }

    /// Passed, and no cell was vacuous.
    pub fn strictly_passed(&self) -> bool {
        self.passed() && self.cells.iter().all(|c| c.ordering == OrderingCheck::Pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.cells {
            let gaps: Vec<String> = c
                .relative_gaps
                .iter()
                .map(|(id, g)| format!("E{id}={g:.6}"))
                .collect();
            s.push_str(&format!(
                "cell k={} alpha={} bound={} ordering={:?} gaps [{}]\n",
                c.k,
                c.alpha,
                if c.bound_holds { "pass" } else { "FAIL" },
                c.ordering,
                gaps.join(" ")
            ));
        }
        s.push_str(&format!("narrative {}\n", if self.passed() { "pass" } else { "FAIL" }));
        s
    }
}

fn relative_gap(n: &NodeTrust) -> f64 {
    (n.eatv - n.btv).abs() / n.btv.max(GAP_FLOOR)
}

fn check_cell(k: f64, alpha: f64, report: &TrustReport) -> CellCheck {
    let bound_holds = report
        .nodes
        .iter()
        .all(|n| (n.eatv - n.btv).abs() <= (1.0 - n.epsilon) * (n.btv - n.trust).abs() + BOUND_SLACK);
    let group = |ids: &[NodeId]| -> Vec<&NodeTrust> {
        ids.iter().map(|&id| report.node(id).expect("fixture checked")).collect()
    };
    let resilient = group(&RESILIENT);
    let vulnerable = group(&VULNERABLE);
    let dropped = |g: &[&NodeTrust]| g.iter().any(|n| n.btv != n.trust);
    let ordering = if !dropped(&resilient) || !dropped(&vulnerable) {
        OrderingCheck::Vacuous
    } else {
        let worst_resilient = resilient.iter().map(|n| relative_gap(n)).fold(f64::MIN, f64::max);
        let best_vulnerable = vulnerable.iter().map(|n| relative_gap(n)).fold(f64::MAX, f64::min);
        if worst_resilient < best_vulnerable {
            OrderingCheck::Pass
        } else {
            OrderingCheck::Fail
        }
    };
    CellCheck {
        k,
        alpha,
        bound_holds,
        ordering,
        relative_gaps: resilient
            .iter()
            .chain(&vulnerable)
            .map(|n| (n.id, relative_gap(n)))
            .collect(),
    }
}

/// Per-cell checks on a sweep of the fixture topology.
pub fn narrative_check(result: &SweepResult) -> Result<NarrativeSummary> {
    for id in RESILIENT.iter().chain(&VULNERABLE) {
        let node = result.graph.node(*id).ok_or_else(|| {
            Error::param("fixture", format!("sweep graph has no node E{id}"))
        })?;
        let ok = if RESILIENT.contains(id) {
            node.epsilon >= 0.9
        } else {
            node.epsilon <= 0.3
        };
        if !ok {
            return Err(Error::param(
                "fixture",
                format!("E{id} has resilience {} which does not fit its group", node.epsilon),
            ));
        }
    }
    Ok(NarrativeSummary {
        cells: result
            .cells
            .iter()
            .map(|c| check_cell(c.k, c.alpha, &c.report))
            .collect(),
    })
}

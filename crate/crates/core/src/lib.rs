//! Topology-based trust scoring for in-vehicle ECU networks.
//!
//! ECUs form a directed dependency graph; each dependency `i -> j` lets `j`
//! infer what `i` should report. Disagreement between a reported value and
//! its inferences lowers trust, with each ECU's resilience to remote
//! injection deciding how much its testimony counts.
//!
//! - [`graph`]: dependency graph, validation, seeded generation, file format
//! - [`snapshot`]: observed/inferred values and attack scenarios
//! - [`trust`]: edge weights, trust, baseline and adjusted trust, reports
//! - [`detector`]: contradiction-threshold flagging
//! - [`experiment`]: the reference fixture, (k, alpha) sweeps, figure output

pub mod cli;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod par;
pub mod snapshot;
pub mod svg;
pub mod trust;

pub use detector::{detect, DetectionReport, DetectorParams};
pub use error::{Error, Result};
pub use graph::{generate_random, DependencyGraph, EcuNode, EpsilonDistribution, NodeId};
pub use par::Execution;
pub use snapshot::{synthesize_snapshot, AttackMode, AttackSpec, ScenarioSpec, Snapshot};
pub use trust::{
    adjusted_trust, baseline_trust, edge_weight, full_report, trust_scores, EvalMode, TrustParams,
    TrustReport,
};

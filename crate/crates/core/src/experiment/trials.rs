//! Monte Carlo runs of the detector against single-node injections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::detector::{detect, DetectorParams};
use crate::error::{Error, Result};
use crate::graph::{generate_random, DependencyGraph, EpsilonDistribution, NodeId};
use crate::par::Execution;
use crate::snapshot::{synthesize_snapshot, AttackMode, AttackSpec, ScenarioSpec};
use crate::trust::TrustParams;

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTrialConfig {
    pub trials: usize,
    pub seed: u64,
    pub nodes: usize,
    pub edge_probability: f64,
    pub noise_sigma: f64,
    /// Injection size as a multiple of the smallest delta that pushes a
    /// clean edge's weight below the contradiction threshold.
    pub delta_factor: f64,
    /// A victim needs at least `min_resilient_neighbors` out-neighbours with
    /// resilience >= `resilient_epsilon`.
    pub min_resilient_neighbors: usize,
    pub resilient_epsilon: f64,
    pub trust: TrustParams,
    pub detector: DetectorParams,
}

impl Default for DetectionTrialConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 7,
            nodes: 20,
            edge_probability: 0.15,
            noise_sigma: 0.05,
            delta_factor: 2.0,
            min_resilient_neighbors: 2,
            resilient_epsilon: 0.5,
            trust: TrustParams::new(1.0, 0.1),
            detector: DetectorParams::default(),
        }
    }
}

impl DetectionTrialConfig {
    pub fn delta(&self) -> f64 {
        self.delta_factor * (1.0 / self.detector.weight_threshold).ln() / self.trust.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub graph_seed: u64,
    pub compromised: NodeId,
    pub flagged: bool,
    pub ranked_first: bool,
    /// Nodes flagged on the same graph and scenario without the attack.
    pub clean_flags: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub outcomes: Vec<TrialOutcome>,
}

impl TrialSummary {
    /// Trials whose victim was flagged and ranked first.
    pub fn detected_first(&self) -> usize {
        self.outcomes.iter().filter(|o| o.flagged && o.ranked_first).count()
    }

    pub fn clean_false_flags(&self) -> usize {
        self.outcomes.iter().map(|o| o.clean_flags.len()).sum()
    }
}

fn eligible(graph: &DependencyGraph, cfg: &DetectionTrialConfig) -> Vec<NodeId> {
    graph
        .nodes()
        .iter()
        .filter(|n| {
            let strong = graph
                .out_neighbors(n.id)
                .expect("node exists")
                .iter()
                .filter(|&&j| graph.node(j).expect("node exists").epsilon >= cfg.resilient_epsilon)
                .count();
            strong >= cfg.min_resilient_neighbors
        })
        .map(|n| n.id)
        .collect()
}

fn run_trial(cfg: &DetectionTrialConfig, trial: u64) -> Result<TrialOutcome> {
    let trial_seed = cfg.seed.wrapping_add(trial.wrapping_mul(SEED_STRIDE));
    for attempt in 0..MAX_ATTEMPTS {
        let graph_seed = trial_seed.wrapping_add(attempt);
        let graph = generate_random(
            cfg.nodes,
            cfg.edge_probability,
            EpsilonDistribution::default(),
            graph_seed,
        )?;
        let candidates = eligible(&graph, cfg);
        if candidates.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
        rng.set_stream(3);
        let victim = candidates[rng.random_range(0..candidates.len())];

        let clean = ScenarioSpec::seeded_truth(&graph, 10.0, 100.0, graph_seed).with_noise(cfg.noise_sigma);
        let attacked = clean
            .clone()
            .with_attack(AttackSpec::new([victim], AttackMode::SelfInjection, cfg.delta()));

        let report = detect(&graph, &synthesize_snapshot(&graph, &attacked)?, &cfg.trust, &cfg.detector)?;
        let clean_report = detect(&graph, &synthesize_snapshot(&graph, &clean)?, &cfg.trust, &cfg.detector)?;
        return Ok(TrialOutcome {
            graph_seed,
            compromised: victim,
            flagged: report.node(victim).is_some_and(|n| n.flagged),
            ranked_first: report.ranking.first() == Some(&victim),
            clean_flags: clean_report.flagged(),
        });
    }
    Err(Error::param(
        "trials",
        format!("no eligible victim after {MAX_ATTEMPTS} graphs for trial {trial}"),
    ))
}

pub fn run_detection_trials(cfg: &DetectionTrialConfig, execution: Execution) -> Result<TrialSummary> {
    cfg.trust.validate()?;
    cfg.detector.validate()?;
    if cfg.trust.k <= 0.0 {
        return Err(Error::param("k", "must be > 0 for injections to lower weights"));
    }
    let trials: Vec<u64> = (0..cfg.trials as u64).collect();
    let outcomes = execution
        .map(&trials, |&t| run_trial(cfg, t))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(TrialSummary { outcomes })
}

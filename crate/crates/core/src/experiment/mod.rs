//! (k, alpha) parameter sweeps over one graph and one snapshot.

mod fixture;
mod narrative;
mod trials;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{
    expect_header, generate_random, load_graph, parse_field, significant_lines, DependencyGraph,
    EpsilonDistribution,
};
use crate::par::Execution;
use crate::snapshot::{
    deviation_rows, load_scenario, parse_id_list, synthesize_snapshot, AttackMode, AttackSpec,
    ScenarioSpec, Snapshot,
};
use crate::svg::{grouped_bars, Series};
use crate::trust::{report_from_deviations, EvalMode, TrustParams, TrustReport};

pub use fixture::{
    derive_reference_fixture, reference_fixture, COMPROMISED, E2_DEPENDENCIES, FIXTURE_GRAPH,
    FIXTURE_GRAPH_SHA256, FIXTURE_SCENARIO, FIXTURE_SEED, FIXTURE_VERSION, RESILIENT,
    RESILIENT_OUT_DEGREES, VULNERABLE,
};
pub use narrative::{narrative_check, CellCheck, NarrativeSummary, OrderingCheck};
pub use trials::{run_detection_trials, DetectionTrialConfig, TrialOutcome, TrialSummary};

pub const SWEEP_HEADER: &str = "trustconnect-sweep v1";
pub const MANIFEST_NAME: &str = "manifest.txt";
pub const DEFAULT_K_VALUES: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
pub const DEFAULT_ALPHA_VALUES: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Fixture,
    File(PathBuf),
    Random {
        n: usize,
        p: f64,
        epsilon: EpsilonDistribution,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Fixture,
    File(PathBuf),
    /// Seeded uniform ground truth in `[low, high)`.
    Generated {
        seed: u64,
        low: f64,
        high: f64,
        noise_sigma: f64,
    },
    Inline(ScenarioSpec),
}

/// Replaces whatever attack the scenario source carries.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackOverride {
    Keep,
    Clear,
    Set(AttackSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub graph: GraphSource,
    pub scenario: ScenarioSource,
    pub attack: AttackOverride,
    pub k_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub mode: EvalMode,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            graph: GraphSource::Fixture,
            scenario: ScenarioSource::Fixture,
            attack: AttackOverride::Keep,
            k_values: DEFAULT_K_VALUES.to_vec(),
            alpha_values: DEFAULT_ALPHA_VALUES.to_vec(),
            mode: EvalMode::SinglePass,
        }
    }
}

fn check_grid(name: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::param(name, "grid must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::param(name, format!("{v} must be finite and >= 0")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(name, "grid must be strictly ascending"));
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        check_grid("k", &self.k_values)?;
        check_grid("alpha", &self.alpha_values)
    }

    pub fn resolve_graph(&self) -> Result<DependencyGraph> {
        match &self.graph {
            GraphSource::Fixture => Ok(reference_fixture().0),
            GraphSource::File(path) => load_graph(path),
            GraphSource::Random { n, p, epsilon, seed } => generate_random(*n, *p, *epsilon, *seed),
        }
    }

    pub fn resolve_scenario(&self, graph: &DependencyGraph) -> Result<ScenarioSpec> {
        let mut scenario = match &self.scenario {
            ScenarioSource::Fixture => reference_fixture().1,
            ScenarioSource::File(path) => load_scenario(path)?,
            ScenarioSource::Generated {
                seed,
                low,
                high,
                noise_sigma,
            } => ScenarioSpec::seeded_truth(graph, *low, *high, *seed).with_noise(*noise_sigma),
            ScenarioSource::Inline(s) => s.clone(),
        };
        match &self.attack {
            AttackOverride::Keep => {}
            AttackOverride::Clear => scenario.attack = None,
            AttackOverride::Set(a) => scenario.attack = Some(a.clone()),
        }
        Ok(scenario)
    }

    /// Parses the sweep text format. Relative paths are resolved against
    /// `base_dir`.
    ///
    /// ```text
    /// trustconnect-sweep v1
    /// graph fixture | graph file <path> | graph random <n> <p> <dist> <seed>
    /// scenario fixture | scenario file <path> | scenario generated <seed> <low> <high> <noise>
    /// attack none | attack <mode> <delta> <id,id,...>
    /// k 0.1 0.5 1 2
    /// alpha 0.05 0.1 0.2 0.4
    /// mode single-pass | fixed-point
    /// ```
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self> {
        let mut lines = significant_lines(text);
        expect_header(&mut lines, SWEEP_HEADER)?;
        let mut spec = SweepSpec::default();
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        for (n, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let arity = |want: usize| {
                if fields.len() == want {
                    Ok(())
                } else {
                    Err(Error::parse(
                        n,
                        format!("`{}` expects {} fields, found {}", fields[0], want - 1, fields.len() - 1),
                    ))
                }
            };
            let field = |i: usize, name: &str| fields.get(i).copied().ok_or_else(|| {
                Error::parse(n, format!("missing field `{name}`"))
            });
            match (fields[0], fields.get(1).copied()) {
                ("graph", Some("fixture")) => {
                    arity(2)?;
                    spec.graph = GraphSource::Fixture;
                }
                ("graph", Some("file")) => {
                    arity(3)?;
                    spec.graph = GraphSource::File(resolve(fields[2]));
                }
                ("graph", Some("random")) => {
                    arity(6)?;
                    spec.graph = GraphSource::Random {
                        n: parse_field(n, "n", Some(fields[2]))?,
                        p: parse_field(n, "p", Some(fields[3]))?,
                        epsilon: fields[4].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?,
                        seed: parse_field(n, "seed", Some(fields[5]))?,
                    };
                }
                ("scenario", Some("fixture")) => {
                    arity(2)?;
                    spec.scenario = ScenarioSource::Fixture;
                }
                ("scenario", Some("file")) => {
                    arity(3)?;
                    spec.scenario = ScenarioSource::File(resolve(fields[2]));
                }
                ("scenario", Some("generated")) => {
                    arity(6)?;
                    spec.scenario = ScenarioSource::Generated {
                        seed: parse_field(n, "seed", Some(fields[2]))?,
                        low: parse_field(n, "low", Some(fields[3]))?,
                        high: parse_field(n, "high", Some(fields[4]))?,
                        noise_sigma: parse_field(n, "noise", Some(fields[5]))?,
                    };
                }
                ("attack", Some("none")) => {
                    arity(2)?;
                    spec.attack = AttackOverride::Clear;
                }
                ("attack", Some(mode)) => {
                    arity(4)?;
                    let mode: AttackMode =
                        mode.parse().map_err(|e: Error| Error::parse(n, e.to_string()))?;
                    let delta = parse_field(n, "delta", Some(fields[2]))?;
                    let ids = parse_id_list(n, fields[3])?;
                    spec.attack = AttackOverride::Set(AttackSpec::new(ids, mode, delta));
                }
                ("k", _) => {
                    spec.k_values = fields[1..]
                        .iter()
                        .map(|v| parse_field(n, "k", Some(v)))
                        .collect::<Result<_>>()?;
                }
                ("alpha", _) => {
                    spec.alpha_values = fields[1..]
                        .iter()
                        .map(|v| parse_field(n, "alpha", Some(v)))
                        .collect::<Result<_>>()?;
                }
                ("mode", _) => {
                    arity(2)?;
                    spec.mode = field(1, "mode")?
                        .parse()
                        .map_err(|e: Error| Error::parse(n, e.to_string()))?;
                }
                (other, _) => return Err(Error::parse(n, format!("unknown or incomplete record {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

pub fn load_sweep_spec(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SweepSpec::from_text(&text, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub k: f64,
    pub alpha: f64,
    pub report: TrustReport,
}

impl SweepCell {
    /// File stem shared by the cell's CSV and SVG.
    pub fn stem(&self) -> String {
        format!("sweep_k{}_a{}", self.k, self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub graph: DependencyGraph,
    pub snapshot: Snapshot,
    pub scenario_seed: u64,
    pub graph_hash: String,
    pub k_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    /// k-major, each axis ascending.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, k: f64, alpha: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.k == k && c.alpha == alpha)
    }
}

/// Evaluates every `(k, alpha)` pair on one graph and snapshot. The
/// deviations are computed once and shared by every cell.
pub fn sweep_snapshot(
    graph: &DependencyGraph,
    snapshot: &Snapshot,
    k_values: &[f64],
    alpha_values: &[f64],
    base: &TrustParams,
    execution: Execution,
) -> Result<Vec<SweepCell>> {
    graph.ensure_valid()?;
    check_grid("k", k_values)?;
    check_grid("alpha", alpha_values)?;
    base.validate()?;
    let rows = deviation_rows(graph, snapshot)?;
    let hash = graph.content_hash();
    let grid: Vec<(f64, f64)> = k_values
        .iter()
        .flat_map(|&k| alpha_values.iter().map(move |&a| (k, a)))
        .collect();
    Ok(execution.map(&grid, |&(k, alpha)| {
        let params = TrustParams { k, alpha, ..*base };
        SweepCell {
            k,
            alpha,
            report: report_from_deviations(graph, &rows, &params, hash.clone()),
        }
    }))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, Execution::Parallel)
}

pub fn run_sweep_sequential(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, Execution::Sequential)
}

pub fn run_sweep_with(spec: &SweepSpec, execution: Execution) -> Result<SweepResult> {
    spec.validate()?;
    let graph = spec.resolve_graph()?;
    let scenario = spec.resolve_scenario(&graph)?;
    let snapshot = synthesize_snapshot(&graph, &scenario)?;
    let base = TrustParams {
        mode: spec.mode,
        ..TrustParams::default()
    };
    let mut cells = sweep_snapshot(
        &graph,
        &snapshot,
        &spec.k_values,
        &spec.alpha_values,
        &base,
        execution,
    )?;
    for cell in &mut cells {
        cell.report.provenance.seed = Some(scenario.seed);
    }
    Ok(SweepResult {
        graph_hash: graph.content_hash(),
        graph,
        snapshot,
        scenario_seed: scenario.seed,
        k_values: spec.k_values.clone(),
        alpha_values: spec.alpha_values.clone(),
        cells,
    })
}

pub fn cell_svg(cell: &SweepCell) -> String {
    let r = &cell.report;
    let categories: Vec<String> = r.nodes.iter().map(|n| n.label.clone()).collect();
    let series = [
        Series {
            name: "Baseline Trust Value",
            color: "#4c72b0",
            values: r.nodes.iter().map(|n| n.btv).collect(),
        },
        Series {
            name: "Trust Value",
            color: "#dd8452",
            values: r.nodes.iter().map(|n| n.trust).collect(),
        },
        Series {
            name: "Adjusted Trust Value",
            color: "#55a868",
            values: r.nodes.iter().map(|n| n.eatv).collect(),
        },
    ];
    grouped_bars(&format!("k={}, a={}", cell.k, cell.alpha), &categories, &series)
}

pub fn manifest_text(result: &SweepResult) -> String {
    let mut s = String::from("trustconnect-manifest v1\n");
    s.push_str(&format!("graph_hash {}\n", result.graph_hash));
    s.push_str(&format!("seed {}\n", result.scenario_seed));
    s.push_str(&format!("cells {}\n", result.cells.len()));
    for c in &result.cells {
        let stem = c.stem();
        s.push_str(&format!(
            "cell k={} alpha={} csv={stem}.csv svg={stem}.svg network_trust={}\n",
            c.k, c.alpha, c.report.network_trust
        ));
    }
    s
}

/// Writes one CSV and one SVG per cell plus a manifest, in grid order.
/// Returns the written paths.
pub fn emit_figure_data(result: &SweepResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(result.cells.len() * 2 + 1);
    let mut write = |name: String, contents: String| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for cell in &result.cells {
        write(format!("{}.csv", cell.stem()), cell.report.to_csv())?;
        write(format!("{}.svg", cell.stem()), cell_svg(cell))?;
    }
    write(MANIFEST_NAME.to_string(), manifest_text(result))?;
    Ok(written)
}

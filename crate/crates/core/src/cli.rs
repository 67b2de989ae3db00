//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
//! 3 nodes flagged under `detect --fail-on-flag`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::detector::{detect, DetectorParams};
use crate::error::{Error, Result};
use crate::experiment::{
    emit_figure_data, load_sweep_spec, manifest_text, narrative_check, reference_fixture, run_sweep,
};
use crate::graph::{generate_random, load_graph, save_graph, DependencyGraph, EpsilonDistribution, NodeId};
use crate::snapshot::{
    load_scenario, load_snapshot, save_scenario, synthesize_snapshot, AttackMode, AttackSpec,
    ScenarioSpec, Snapshot,
};
use crate::trust::{full_report, EvalMode, TrustParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "trustconnect", version, about = "Trust scoring for in-vehicle ECU dependency graphs")]
pub struct Cli {
    /// Seed for random generation; falls back to TRUSTCONNECT_SEED, then 42.
    #[arg(long, global = true, env = "TRUSTCONNECT_SEED")]
    pub seed: Option<u64>,

    /// Directory for outputs when no explicit --out is given.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Report format for eval and detect.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Text => "txt",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded random dependency graph.
    Generate(GenerateArgs),
    /// Score every ECU on one snapshot.
    Eval(EvalArgs),
    /// Run a (k, alpha) sweep from a sweep spec file and write CSV/SVG output.
    Sweep(SweepArgs),
    /// Flag ECUs contradicted by resilient neighbours.
    Detect(DetectArgs),
    /// Write the committed reference fixture (graph and scenario) to disk.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of ECUs.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Independent probability of each ordered edge.
    #[arg(long, default_value_t = crate::graph::DEFAULT_EDGE_PROBABILITY)]
    pub p: f64,
    /// uniform, uniform(lo,hi), constant(v) or beta(a,b).
    #[arg(long, default_value = "uniform")]
    pub epsilon_dist: String,
    /// Graph file to write; defaults to <output-dir>/graph.txt, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphInput {
    /// Graph file.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub graph: Option<PathBuf>,
    /// Use the committed reference fixture graph (and its scenario by default).
    #[arg(long)]
    pub fixture: bool,
}

#[derive(Debug, Args)]
pub struct ScenarioInput {
    /// Snapshot file; excludes every scenario flag.
    #[arg(long, conflicts_with_all = [
        "scenario", "attack_nodes", "attack_mode", "delta", "noise_sigma", "no_attack",
        "truth_low", "truth_high", "scenario_seed",
    ])]
    pub snapshot: Option<PathBuf>,
    /// Scenario file; inline flags below override its fields.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Comma separated ids of compromised ECUs.
    #[arg(long, value_delimiter = ',')]
    pub attack_nodes: Option<Vec<NodeId>>,
    /// self-injection, inference-corruption or both.
    #[arg(long)]
    pub attack_mode: Option<String>,
    /// Injection offset.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Standard deviation of honest inference noise.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Drop any attack carried by the scenario.
    #[arg(long, conflicts_with = "attack_nodes")]
    pub no_attack: bool,
    /// Lower bound of generated ground truth.
    #[arg(long, default_value_t = 10.0)]
    pub truth_low: f64,
    /// Upper bound of generated ground truth.
    #[arg(long, default_value_t = 100.0)]
    pub truth_high: f64,
    /// Overrides the noise seed of a scenario file or the fixture scenario.
    #[arg(long)]
    pub scenario_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrustArgs {
    /// Weight decay per unit of deviation.
    #[arg(long, default_value_t = 0.5)]
    pub k: f64,
    /// Amplification of neighbour resilience.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Trust assumed for neighbours not yet scored.
    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,
    /// single-pass or fixed-point.
    #[arg(long, default_value = "single-pass")]
    pub trust_mode: String,
    #[arg(long, default_value_t = 100)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

impl TrustArgs {
    fn params(&self) -> Result<TrustParams> {
        let params = TrustParams {
            k: self.k,
            alpha: self.alpha,
            c0: self.c0,
            mode: self.trust_mode.parse::<EvalMode>()?,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[command(flatten)]
    pub scenario: ScenarioInput,
    #[command(flatten)]
    pub trust: TrustArgs,
    /// Report file; defaults to <output-dir>/report.<ext>, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep spec file (`trustconnect-sweep v1`).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory; defaults to --output-dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub graph: GraphInput,
    #[command(flatten)]
    pub scenario: ScenarioInput,
    #[command(flatten)]
    pub trust: TrustArgs,
    /// An edge contradicts when its weight is below this; in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub weight_threshold: f64,
    /// Flag a node when its evidence reaches this.
    #[arg(long, default_value_t = 1.0)]
    pub evidence_threshold: f64,
    /// Exit with status 3 when any node is flagged.
    #[arg(long)]
    pub fail_on_flag: bool,
    /// Report file; defaults to <output-dir>/detection.<ext>, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Directory to write into; defaults to --output-dir, else the current directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Context<'a> {
    seed: u64,
    output_dir: Option<PathBuf>,
    format: Format,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Context<'_> {
    fn destination(&self, explicit: &Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
        explicit
            .clone()
            .or_else(|| self.output_dir.as_ref().map(|d| d.join(default_name)))
    }

    fn emit(&mut self, dest: Option<PathBuf>, contents: &str) -> Result<()> {
        match dest {
            Some(path) => write_file(&path, contents),
            None => self
                .out
                .write_all(contents.as_bytes())
                .map_err(|e| Error::io("<stdout>", e)),
        }
    }

    fn say(&mut self, line: String) {
        let _ = writeln!(self.out, "{line}");
    }

    fn warn(&mut self, line: String) {
        let _ = writeln!(self.err, "warning: {line}");
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let mut ctx = Context {
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        output_dir: cli.output_dir,
        format: cli.format,
        out,
        err,
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(&mut ctx, a),
        Command::Eval(a) => cmd_eval(&mut ctx, a),
        Command::Sweep(a) => cmd_sweep(&mut ctx, a),
        Command::Detect(a) => cmd_detect(&mut ctx, a),
        Command::Fixture(a) => cmd_fixture(&mut ctx, a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn cmd_generate(ctx: &mut Context<'_>, a: &GenerateArgs) -> Result<i32> {
    let dist: EpsilonDistribution = a.epsilon_dist.parse()?;
    let graph = generate_random(a.n, a.p, dist, ctx.seed)?;
    let summary = format!("nodes {} edges {}", graph.len(), graph.edge_count());
    match ctx.destination(&a.out, "graph.txt") {
        Some(path) => {
            write_file(&path, &graph.to_text())?;
            ctx.say(summary);
        }
        None => {
            ctx.emit(None, &graph.to_text())?;
            let _ = writeln!(ctx.err, "{summary}");
        }
    }
    Ok(EXIT_OK)
}

fn load_input_graph(g: &GraphInput) -> Result<DependencyGraph> {
    match &g.graph {
        Some(path) => load_graph(path),
        None => Ok(reference_fixture().0),
    }
}

/// Resolves the snapshot for eval/detect: an explicit snapshot file, or a
/// scenario (file, fixture or generated) with inline overrides applied.
fn resolve_snapshot(
    ctx: &mut Context<'_>,
    g: &GraphInput,
    s: &ScenarioInput,
    graph: &DependencyGraph,
) -> Result<(Snapshot, Option<u64>)> {
    if let Some(path) = &s.snapshot {
        let snap = load_snapshot(path)?;
        snap.check_complete(graph)?;
        return Ok((snap, None));
    }
    let from_file = s.scenario.is_some();
    let mut scenario = match &s.scenario {
        Some(path) => load_scenario(path)?,
        None if g.fixture => reference_fixture().1,
        None => ScenarioSpec::seeded_truth(graph, s.truth_low, s.truth_high, ctx.seed),
    };
    let mut overridden = Vec::new();
    if let Some(seed) = s.scenario_seed {
        scenario.seed = seed;
        overridden.push("--scenario-seed");
    }
    if let Some(sigma) = s.noise_sigma {
        scenario.noise_sigma = sigma;
        overridden.push("--noise-sigma");
    }
    if s.no_attack {
        scenario.attack = None;
        overridden.push("--no-attack");
    }
    let mode = s.attack_mode.as_deref().map(str::parse::<AttackMode>).transpose()?;
    match (&s.attack_nodes, scenario.attack.as_mut()) {
        (Some(nodes), existing) => {
            let mode = mode.or(existing.as_ref().map(|a| a.mode)).unwrap_or(AttackMode::Both);
            let delta = s.delta.or(existing.as_ref().map(|a| a.delta)).unwrap_or(1.0);
            scenario.attack = Some(AttackSpec::new(nodes.iter().copied(), mode, delta));
            overridden.push("--attack-nodes");
        }
        (None, Some(existing)) => {
            if let Some(mode) = mode {
                existing.mode = mode;
                overridden.push("--attack-mode");
            }
            if let Some(delta) = s.delta {
                existing.delta = delta;
                overridden.push("--delta");
            }
        }
        (None, None) => {
            if mode.is_some() || s.delta.is_some() {
                ctx.warn("--attack-mode/--delta ignored without --attack-nodes".to_string());
            }
        }
    }
    if from_file && !overridden.is_empty() {
        ctx.warn(format!(
            "inline {} override fields of the scenario file",
            overridden.join(", ")
        ));
    }
    let snapshot = synthesize_snapshot(graph, &scenario)?;
    Ok((snapshot, Some(scenario.seed)))
}

fn cmd_eval(ctx: &mut Context<'_>, a: &EvalArgs) -> Result<i32> {
    let params = a.trust.params()?;
    let graph = load_input_graph(&a.graph)?;
    let (snapshot, seed) = resolve_snapshot(ctx, &a.graph, &a.scenario, &graph)?;
    let mut report = full_report(&graph, &snapshot, &params)?;
    report.provenance.seed = seed;
    let body = match ctx.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    let dest = ctx.destination(&a.out, &format!("report.{}", ctx.format.extension()));
    ctx.emit(dest, &body)?;
    if !report.convergence.converged || !report.baseline_convergence.converged {
        ctx.warn(format!(
            "fixed-point iteration did not converge within {} iterations",
            params.max_iterations
        ));
    }
    Ok(EXIT_OK)
}

fn cmd_detect(ctx: &mut Context<'_>, a: &DetectArgs) -> Result<i32> {
    let det = DetectorParams {
        weight_threshold: a.weight_threshold,
        evidence_threshold: a.evidence_threshold,
    };
    det.validate()?;
    let params = a.trust.params()?;
    let graph = load_input_graph(&a.graph)?;
    let (snapshot, _) = resolve_snapshot(ctx, &a.graph, &a.scenario, &graph)?;
    let report = detect(&graph, &snapshot, &params, &det)?;
    let body = match ctx.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    let dest = ctx.destination(&a.out, &format!("detection.{}", ctx.format.extension()));
    ctx.emit(dest, &body)?;
    if a.fail_on_flag && !report.flagged().is_empty() {
        return Ok(EXIT_FLAGGED);
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(ctx: &mut Context<'_>, a: &SweepArgs) -> Result<i32> {
    let dir = a
        .out
        .clone()
        .or_else(|| ctx.output_dir.clone())
        .ok_or_else(|| Error::param("out", "sweep needs --out or --output-dir"))?;
    let spec = load_sweep_spec(&a.spec)?;
    let result = run_sweep(&spec)?;
    let written = emit_figure_data(&result, &dir)?;
    ctx.say(format!("wrote {} files to {}", written.len(), dir.display()));
    let manifest = manifest_text(&result);
    ctx.emit(None, &manifest)?;
    if let Ok(summary) = narrative_check(&result) {
        ctx.emit(None, &summary.to_text())?;
    }
    Ok(EXIT_OK)
}

fn cmd_fixture(ctx: &mut Context<'_>, a: &FixtureArgs) -> Result<i32> {
    let dir = a
        .out
        .clone()
        .or_else(|| ctx.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (graph, scenario) = reference_fixture();
    let graph_path = dir.join("reference_fixture.graph");
    let scenario_path = dir.join("reference_fixture.scenario");
    save_graph(&graph, &graph_path)?;
    save_scenario(&scenario, &scenario_path)?;
    ctx.say(format!("wrote {}", graph_path.display()));
    ctx.say(format!("wrote {}", scenario_path.display()));
    Ok(EXIT_OK)
}

//! Exit criteria. Run with `cargo test --test acceptance -- --nocapture` to
//! see one PASS/FAIL line per criterion.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use trustconnect::experiment::{
    narrative_check, reference_fixture, run_detection_trials, run_sweep, DetectionTrialConfig,
    OrderingCheck, SweepSpec, DEFAULT_ALPHA_VALUES, DEFAULT_K_VALUES, RESILIENT,
    RESILIENT_OUT_DEGREES, VULNERABLE,
};
use trustconnect::snapshot::deviations;
use trustconnect::{
    adjusted_trust, baseline_trust, edge_weight, full_report, generate_random,
    synthesize_snapshot, trust_scores, EpsilonDistribution, EvalMode, Execution, ScenarioSpec,
    Snapshot, TrustParams,
};

use common::{oracle_single_pass, random_small_graph, random_snapshot, rng};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Criterion 1: Single-pass trust equals the brute-force transcription within 1e-12.
fn closed_form_oracle() -> Outcome {
    let mut r = rng(1001);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let g = random_small_graph(&mut r, 6);
        let s = random_snapshot(&mut r, &g);
        let k = r.random_range(0.0..3.0);
        let alpha = r.random_range(0.0..1.0);
        let c0 = r.random_range(0.0..2.0);
        let params = TrustParams {
            k,
            alpha,
            c0,
            ..TrustParams::default()
        };
        let got = trust_scores(&g, &s, &params).unwrap();
        let want = oracle_single_pass(&g, &s, k, alpha, c0);
        for (id, v) in got.values {
            worst = worst.max((v - want[&id]).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |diff| = {worst:e} over 200 graphs"))
}

/// Criterion 2: Baseline equals trust on the zero-deviation snapshot, bitwise.
fn baseline_identity() -> Outcome {
    let mut r = rng(2002);
    let mut mismatches = 0;
    for case in 0..50 {
        let g = random_small_graph(&mut r, 12);
        let mode = if case % 2 == 0 {
            EvalMode::SinglePass
        } else {
            EvalMode::FixedPoint
        };
        let params = TrustParams {
            k: r.random_range(0.0..3.0),
            alpha: r.random_range(0.0..0.2),
            c0: r.random_range(0.0..2.0),
            ..TrustParams::default()
        }
        .with_mode(mode);
        let zero = Snapshot::consistent(&g, |id| id as f64 * 1.5);
        let t = trust_scores(&g, &zero, &params).unwrap();
        let b = baseline_trust(&g, &params).unwrap();
        mismatches += t
            .values
            .iter()
            .zip(&b.values)
            .filter(|((_, x), (_, y))| x.to_bits() != y.to_bits())
            .count();
    }
    outcome(mismatches == 0, format!("{mismatches} bitwise mismatches over 50 cases"))
}

/// Criterion 3: Adjusted trust endpoints are exact; the convex form agrees to 1e-12.
fn adjusted_identities() -> Outcome {
    let mut r = rng(3003);
    let mut endpoint_failures = 0;
    let mut worst = 0.0_f64;
    for _ in 0..100_000 {
        let b = r.random_range(-100.0..100.0);
        let t = r.random_range(-100.0..100.0);
        let e = r.random_range(0.0..=1.0);
        if adjusted_trust(b, t, 1.0).unwrap() != b || adjusted_trust(b, t, 0.0).unwrap() != t {
            endpoint_failures += 1;
        }
        let v = adjusted_trust(b, t, e).unwrap();
        let literal = b - (b - t) * (1.0 - e);
        worst = worst.max((v - (e * b + (1.0 - e) * t)).abs()).max((v - literal).abs());
    }
    outcome(
        endpoint_failures == 0 && worst <= 1e-12,
        format!("{endpoint_failures} endpoint failures, max |diff| = {worst:e} over 1e5 triples"),
    )
}

/// Criterion 4: Resilient ECUs keep adjusted trust closer to baseline than vulnerable
/// ones in every grid cell, and the adjustment bound holds everywhere.
fn narrative_reproduction() -> Outcome {
    let (g, scenario) = reference_fixture();
    let structure_ok = RESILIENT
        .iter()
        .zip(&RESILIENT_OUT_DEGREES)
        .all(|(&id, &deg)| g.out_degree(id).unwrap() == deg && g.node(id).unwrap().epsilon >= 0.9)
        && VULNERABLE.iter().all(|&id| g.node(id).unwrap().epsilon <= 0.3)
        && g.out_neighbors(2).unwrap() == vec![1, 4, 5, 11, 13, 17];
    let attack_ok = scenario.attack.as_ref().is_some_and(|a| {
        a.compromised
            .iter()
            .all(|&id| g.contains_edge(2, id) && g.node(id).unwrap().epsilon <= 0.3)
    });
    let summary = narrative_check(&run_sweep(&SweepSpec::default()).unwrap()).unwrap();
    let cells_ok = summary.cells.len() == 16
        && summary
            .cells
            .iter()
            .all(|c| c.bound_holds && c.ordering == OrderingCheck::Pass);
    let failing: Vec<String> = summary
        .cells
        .iter()
        .filter(|c| !(c.bound_holds && c.ordering == OrderingCheck::Pass))
        .map(|c| format!("k={} a={}", c.k, c.alpha))
        .collect();
    outcome(
        structure_ok && attack_ok && cells_ok,
        format!(
            "structure {structure_ok}, attack {attack_ok}, {} of 16 cells pass {failing:?}",
            16 - failing.len()
        ),
    )
}

/// Criterion 5: For D <= 1 and k in [0, 0.2], weights move by at most 0.2 and never
/// beyond D * |k1 - k2|.
fn k_insensitivity() -> Outcome {
    let (g, scenario) = reference_fixture();
    let snap = synthesize_snapshot(&g, &scenario).unwrap();
    let mut ds: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
    ds.extend(deviations(&g, &snap).unwrap().into_values().filter(|&d| d <= 1.0));
    let ks: Vec<f64> = (0..=20).map(|i| i as f64 * 0.01).collect();
    let mut max_gap = 0.0_f64;
    let mut bound_violations = 0;
    for &d in &ds {
        for &k1 in &ks {
            for &k2 in &ks {
                let gap = (edge_weight(d, k1).unwrap() - edge_weight(d, k2).unwrap()).abs();
                max_gap = max_gap.max(gap);
                // analytic bound plus one rounding step of exp
                if gap > d * (k1 - k2).abs() + 1e-15 {
                    bound_violations += 1;
                }
            }
        }
    }
    outcome(
        max_gap <= 0.2 && bound_violations == 0,
        format!("max |dW| = {max_gap:.6} over {} deviations, {bound_violations} bound violations", ds.len()),
    )
}

/// Criterion 6: Trust is non-decreasing in alpha at each k, strictly for some node.
fn alpha_monotonicity() -> Outcome {
    let result = run_sweep(&SweepSpec::default()).unwrap();
    let mut decreases = 0;
    let mut strict = 0;
    for &k in &DEFAULT_K_VALUES {
        for pair in DEFAULT_ALPHA_VALUES.windows(2) {
            let lo = &result.cell(k, pair[0]).unwrap().report;
            let hi = &result.cell(k, pair[1]).unwrap().report;
            for (a, b) in lo.nodes.iter().zip(&hi.nodes) {
                if b.trust < a.trust {
                    decreases += 1;
                }
                if b.trust > a.trust {
                    strict += 1;
                }
            }
        }
    }
    outcome(
        decreases == 0 && strict > 0,
        format!("{decreases} decreases, {strict} strict increases"),
    )
}

/// Criterion 7: The injected node is flagged and ranked first in >= 95 of 100 runs;
/// clean counterparts raise no flags.
fn detector_soundness() -> Outcome {
    let cfg = DetectionTrialConfig::default();
    let summary = run_detection_trials(&cfg, Execution::Parallel).unwrap();
    let eligible = summary.outcomes.iter().all(|o| {
        let g = generate_random(cfg.nodes, cfg.edge_probability, EpsilonDistribution::default(), o.graph_seed)
            .unwrap();
        g.out_neighbors(o.compromised)
            .unwrap()
            .iter()
            .filter(|&&j| g.node(j).unwrap().epsilon >= 0.5)
            .count()
            >= 2
    });
    let hits = summary.detected_first();
    let false_flags = summary.clean_false_flags();
    outcome(
        summary.outcomes.len() == 100 && eligible && hits >= 95 && false_flags == 0,
        format!("{hits}/100 flagged and ranked first, {false_flags} clean flags, victims eligible {eligible}"),
    )
}

fn run_bin(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_trustconnect"))
        .env_remove("TRUSTCONNECT_SEED")
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Criterion 8: Repeated generate/eval/sweep invocations are byte-identical.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("sweep.txt");
    fs::write(&spec, "trustconnect-sweep v1\ngraph fixture\nscenario fixture\n").unwrap();
    let mut runs = Vec::new();
    for round in 0..2 {
        let dir = tmp.path().join(format!("run{round}"));
        let graph = dir.join("graph.txt");
        let sweep_dir = dir.join("sweep");
        let mut bytes = run_bin(&["generate", "--seed", "42", "--out", graph.to_str().unwrap()]);
        bytes.extend(fs::read(&graph).unwrap());
        bytes.extend(run_bin(&["eval", "--graph", graph.to_str().unwrap(), "--format", "json"]));
        bytes.extend(run_bin(&["eval", "--fixture", "--format", "csv"]));
        run_bin(&["sweep", "--spec", spec.to_str().unwrap(), "--out", sweep_dir.to_str().unwrap()]);
        runs.push((bytes, dir_contents(&sweep_dir)));
    }
    let csvs = runs[0].1.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    let svgs = runs[0].1.iter().filter(|(n, _)| n.ends_with(".svg")).count();
    outcome(
        runs[0] == runs[1] && csvs == 16 && svgs == 16,
        format!("{csvs} CSVs and {svgs} SVGs, identical across runs: {}", runs[0] == runs[1]),
    )
}

/// Criterion 9: Fixture sweep and a 1000-node evaluation each finish under a second.
fn performance() -> Outcome {
    let start = Instant::now();
    let result = run_sweep(&SweepSpec::default()).unwrap();
    let sweep = start.elapsed();

    let g = generate_random(1000, 0.01, EpsilonDistribution::default(), 9).unwrap();
    let snap = synthesize_snapshot(
        &g,
        &ScenarioSpec::seeded_truth(&g, 10.0, 100.0, 9).with_noise(0.1),
    )
    .unwrap();
    let start = Instant::now();
    let report = full_report(&g, &snap, &TrustParams::default()).unwrap();
    let eval = start.elapsed();
    outcome(
        result.cells.len() == 16
            && report.nodes.len() == 1000
            && sweep < Duration::from_secs(1)
            && eval < Duration::from_secs(1),
        format!("sweep {sweep:?}, 1000-node eval {eval:?} ({} edges)", g.edge_count()),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("1 closed-form oracle equivalence", closed_form_oracle, Duration::from_secs(5)),
        ("2 baseline identity", baseline_identity, Duration::from_secs(2)),
        ("3 adjusted-trust identities", adjusted_identities, Duration::from_secs(1)),
        ("4 narrative reproduction", narrative_reproduction, Duration::from_secs(1)),
        ("5 k-insensitivity bound", k_insensitivity, Duration::from_secs(1)),
        ("6 alpha monotonicity", alpha_monotonicity, Duration::from_secs(1)),
        ("7 detector soundness", detector_soundness, Duration::from_secs(5)),
        ("8 determinism", determinism, Duration::from_secs(2)),
        ("9 performance sanity", performance, Duration::from_secs(2)),
    ];
    let mut failed = Vec::new();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let ok = result.passed && elapsed < budget;
        println!(
            "[{}] {name}: {} ({elapsed:?}, budget {budget:?})",
            if ok { "PASS" } else { "FAIL" },
            result.detail
        );
        if !ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Acceptance experiments. Each test writes one `criterion N [PASS|FAIL]`
//! line to stderr.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use sa_ea::audit::{monotonicity_fuzz, replay_run, sandwich_check};
use sa_ea::drift::{default_event_grid, ScanPreset};
use sa_ea::ea::{run_on_instance, RunOptions};
use sa_ea::harness::{preset_scaling_experiment, SweepOutcome};
use sa_ea::{
    run_sweep, verify_event_probabilities, AlgorithmParams, Family, FitnessInstance, FunctionSpec,
    InitPolicy, RngStream, StreamRole, SweepSpec,
};
use sa_ea_validation::{cell, non_decreasing, report};

const SEED: u64 = 20_240_601;

fn sweep(mut spec: SweepSpec) -> SweepOutcome {
    spec.master_seed = SEED;
    run_sweep(&spec, None).expect("sweep failed")
}

fn large_s_functions() -> [FunctionSpec; 4] {
    [
        FunctionSpec::OneMax,
        FunctionSpec::Binary,
        FunctionSpec::BinaryValue,
        FunctionSpec::DynamicBinVal,
    ]
}

fn small_s_runs() -> &'static (SweepOutcome, Duration) {
    static RUNS: OnceLock<(SweepOutcome, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let start = Instant::now();
        let spec = preset_scaling_experiment(
            FunctionSpec::OneMax,
            0.8,
            0.5,
            1.5,
            vec![500, 1000, 2000],
            InitPolicy::UniformRandom,
        );
        let out = sweep(spec);
        (out, start.elapsed())
    })
}

#[test]
fn c01_small_s_efficiency() {
    let (out, elapsed) = small_s_runs();
    let successes = out
        .records
        .iter()
        .filter(|r| !r.hit_cap && !r.is_error())
        .count();
    let norm: Vec<f64> = [500, 1000, 2000]
        .iter()
        .map(|&n| cell(&out.summaries, "onemax", n, 0.5, 1.5).mean_norm_generations)
        .collect();
    let ratio = norm[2] / norm[0];
    let pass = successes == 30 && ratio <= 1.5 && elapsed.as_secs_f64() < 120.0;
    let detail = format!(
        "{successes}/30 optimal, mean generations/n = {:.3}, {:.3}, {:.3}, ratio {ratio:.3}, {:.2}s",
        norm[0],
        norm[1],
        norm[2],
        elapsed.as_secs_f64()
    );
    assert!(report(1, "small-s efficiency", pass, &detail));
}

#[test]
fn c02_evaluation_scaling() {
    let (out, _) = small_s_runs();
    let per: Vec<f64> = [500usize, 1000, 2000]
        .iter()
        .map(|&n| {
            cell(&out.summaries, "onemax", n, 0.5, 1.5).mean_evaluations
                / (n as f64 * (n as f64).ln())
        })
        .collect();
    let spread =
        per.iter().cloned().fold(f64::MIN, f64::max) / per.iter().cloned().fold(f64::MAX, f64::min);
    let detail = format!(
        "evaluations/(n ln n) = {:.3}, {:.3}, {:.3}, spread {spread:.3}",
        per[0], per[1], per[2]
    );
    assert!(report(2, "evaluation scaling", spread <= 2.0, &detail));
}

#[test]
fn c03_large_s_failure() {
    let n = 1000;
    let spec = SweepSpec {
        functions: large_s_functions().to_vec(),
        ..preset_scaling_experiment(
            FunctionSpec::OneMax,
            0.8,
            30.0,
            1.5,
            vec![n],
            InitPolicy::UniformRandom,
        )
    };
    let out = sweep(spec);
    let mut pass = out.records.len() == 40;
    let mut parts = Vec::new();
    for f in large_s_functions() {
        let rows: Vec<_> = out
            .records
            .iter()
            .filter(|r| r.function == f.label())
            .collect();
        let stuck = rows
            .iter()
            .filter(|r| !r.is_error() && r.hit_cap && r.final_zeromax as f64 / n as f64 >= 0.05)
            .count();
        let min_z = rows.iter().map(|r| r.final_zeromax).min().unwrap_or(0);
        pass &= stuck == 10;
        parts.push(format!("{} {stuck}/10 (min Z {min_z})", f.label()));
    }
    assert!(report(3, "large-s failure", pass, &parts.join(", ")));
}

#[test]
fn c04_near_optimum_rescue() {
    let spec = preset_scaling_experiment(
        FunctionSpec::OneMax,
        0.8,
        30.0,
        1.5,
        vec![1000],
        InitPolicy::FixedZeromax(10),
    );
    let out = sweep(spec);
    let reached = out
        .records
        .iter()
        .filter(|r| !r.is_error() && !r.hit_cap)
        .count();
    let zs: Vec<String> = out
        .records
        .iter()
        .map(|r| r.final_zeromax.to_string())
        .collect();
    // the same start at a larger dimension, reported but not scored
    let params = AlgorithmParams::new(10_000, 0.8, 30.0, 1.5).unwrap();
    let big = sa_ea::run(
        &params,
        &FunctionSpec::OneMax,
        &RngStream::new(SEED, 4),
        &InitPolicy::FixedZeromax(10),
    )
    .unwrap();
    let detail = format!(
        "{reached}/10 reached the optimum, final ZeroMax [{}]; at n=10000 one run {} after {} generations",
        zs.join(" "),
        if big.hit_cap { "capped" } else { "reached the optimum" },
        big.generations
    );
    assert!(report(4, "near-optimum rescue", reached == 10, &detail));
}

#[test]
fn c05_threshold_bracketing() {
    let s_grid = [0.5, 1.0, 2.0, 3.0, 5.0, 10.0];
    let spec = SweepSpec {
        s_list: s_grid.to_vec(),
        ..preset_scaling_experiment(
            FunctionSpec::OneMax,
            1.0,
            0.5,
            1.5,
            vec![2000],
            InitPolicy::UniformRandom,
        )
    };
    let out = sweep(spec);
    let caps: Vec<f64> = s_grid
        .iter()
        .map(|&s| cell(&out.summaries, "onemax", 2000, s, 1.5).cap_fraction)
        .collect();
    let pass = caps[0] == 0.0 && caps[1] == 0.0 && caps[4] == 1.0 && caps[5] == 1.0;
    let detail = s_grid
        .iter()
        .zip(&caps)
        .map(|(s, c)| format!("s={s}: cap {c:.1}"))
        .collect::<Vec<_>>()
        .join(", ");
    assert!(report(5, "threshold bracketing", pass, &detail));
}

#[test]
fn c06_f_sweep() {
    let f_grid = [1.1, 2.0, 8.0, 32.0];
    let spec = SweepSpec {
        f_list: f_grid.to_vec(),
        ..preset_scaling_experiment(
            FunctionSpec::DynamicBinVal,
            1.0,
            1.8,
            1.5,
            vec![500],
            InitPolicy::UniformRandom,
        )
    };
    let out = sweep(spec);
    let caps: Vec<f64> = f_grid
        .iter()
        .map(|&f| cell(&out.summaries, "dynbinval", 500, 1.8, f).cap_fraction)
        .collect();
    let pass = caps[0] == 0.0 && non_decreasing(&caps) && caps[3] == 1.0;
    let detail = f_grid
        .iter()
        .zip(&caps)
        .map(|(f, c)| format!("F={f}: cap {c:.1}"))
        .collect::<Vec<_>>()
        .join(", ");
    assert!(report(6, "F-sweep", pass, &detail));
}

#[test]
fn c07_success_rate_equilibrium() {
    let (n, s) = (1000, 30.0);
    let target = 1.0 / (s + 1.0);
    let (lo, hi) = (0.5 * target, 2.0 * target);
    let params = AlgorithmParams::new(n, 0.8, s, 1.5)
        .unwrap()
        .with_generation_cap(100_000);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, f) in large_s_functions().iter().enumerate() {
        let seed = RngStream::new(SEED, 700 + i as u64);
        let instance =
            FitnessInstance::new(f, n, &mut seed.derive_indexed(StreamRole::Environment, 0))
                .unwrap();
        let (mut window, mut successes) = (0u64, 0u64);
        let result = run_on_instance(
            &params,
            instance,
            &seed,
            &InitPolicy::UniformRandom,
            &RunOptions::default(),
            |rec| {
                if (10_000..100_000).contains(&rec.t) {
                    window += 1;
                    successes += rec.success as u64;
                }
            },
        )
        .unwrap();
        let rate = successes as f64 / window.max(1) as f64;
        pass &= result.hit_cap && window > 0 && (lo..=hi).contains(&rate);
        parts.push(format!("{} {rate:.4}", f.label()));
    }
    let detail = format!(
        "success fraction {} (band [{lo:.4}, {hi:.4}])",
        parts.join(", ")
    );
    assert!(report(7, "success-rate equilibrium", pass, &detail));
}

#[test]
fn c08_event_probabilities() {
    let grid = default_event_grid();
    let ev = verify_event_probabilities(&grid, 1_000_000, &RngStream::new(SEED, 8)).unwrap();
    let failures = ev.failures();
    let detail = format!(
        "{} cases at 10^6 trials, {failures} outside 4 standard errors",
        grid.len()
    );
    assert!(report(
        8,
        "event-probability oracle",
        failures == 0,
        &detail
    ));
}

#[test]
fn c09_drift_sign_scans() {
    let rng = RngStream::new(SEED, 9);
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["g1", "g4"] {
        let scan = ScanPreset::by_name(name).unwrap().run(&rng).unwrap();
        pass &= scan.all_positive();
        parts.push(format!(
            "{name} {}/{} cells positive",
            scan.verdicts
                .iter()
                .filter(|v| v.verdict.as_str() == "positive")
                .count(),
            scan.verdicts.len()
        ));
    }
    assert!(report(9, "drift-sign scans", pass, &parts.join(", ")));
}

#[test]
fn c10_invariant_suites() {
    let rng = RngStream::new(SEED, 10);
    let functions = [
        FunctionSpec::OneMax,
        FunctionSpec::Binary,
        FunctionSpec::BinaryValue,
        FunctionSpec::DynamicBinVal,
        FunctionSpec::hot_topic_default(),
    ];
    let mut reports = Vec::new();
    for (i, f) in functions.iter().enumerate() {
        reports.push(
            monotonicity_fuzz(
                f,
                200,
                10_000,
                3,
                &rng.derive_indexed(StreamRole::Trial, i as u64),
            )
            .unwrap(),
        );
    }
    for family in [Family::g1(), Family::g2(), Family::g3()] {
        reports.push(sandwich_check(family, 1.5, 1.0, 100, 100_000, &rng).unwrap());
    }
    let params = AlgorithmParams::new(200, 1.0, 0.5, 1.5).unwrap();
    for f in &functions {
        let (l, e) = replay_run(&params, f, &rng, &InitPolicy::UniformRandom).unwrap();
        reports.push(l);
        reports.push(e);
    }
    let checks: u64 = reports.iter().map(|r| r.checks).sum();
    let violations: u64 = reports.iter().map(|r| r.violations).sum();
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.name.as_str())
        .collect();
    let detail = format!(
        "{} suites, {checks} checks, {violations} violations {failed:?}",
        reports.len()
    );
    assert!(report(10, "invariant suites", failed.is_empty(), &detail));
}

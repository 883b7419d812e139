//! `sa-ea`: run, sweep, drift, scan, verify and presets.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 run aborted by
//! an adversary hook violation, 3 a verification check failed.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sa_ea::audit::{monotonicity_fuzz, replay_run, sandwich_check, AuditReport};
use sa_ea::drift::{default_event_grid, estimate_drift, verify_event_probabilities, ScanPreset};
use sa_ea::ea::{run_with_options, RunOptions, TrajectoryMode};
use sa_ea::harness::{
    preset_by_name, run_sweep_with_progress, scaling_report, SweepOutputs, SweepSpec, PRESET_NAMES,
};
use sa_ea::{
    AlgorithmParams, Error, Family, FunctionSpec, InitPolicy, PotentialSpec, RngStream,
    SearchPoint, StreamRole,
};

#[derive(Debug, Parser)]
#[command(
    name = "sa-ea",
    version,
    about = "Self-adjusting (1,lambda)-EA simulator and experiment harness"
)]
struct Cli {
    /// Master seed [default: 0, or $SA_EA_SEED when set]
    #[arg(long, global = true, env = "SA_EA_SEED")]
    seed: Option<u64>,

    /// Worker threads for parallel work [default: available parallelism]
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single seeded run; prints one summary line
    Run(RunArgs),
    /// Parameter sweep from a TOML config or a named preset
    Sweep(SweepArgs),
    /// One-step drift estimate at a single state
    Drift(DriftArgs),
    /// Drift-sign scan over a (Z, lambda) grid
    Scan(ScanArgs),
    /// Event-probability and invariant suites; exit 3 on any failure
    Verify(VerifyArgs),
    /// List presets, or print one as a TOML config
    Presets(PresetsArgs),
}

#[derive(Debug, Args)]
struct AlgoArgs {
    /// Benchmark: onemax, binary, binval, dynbinval, hottopic, hook-<strategy>
    #[arg(long, default_value = "onemax")]
    function: FunctionSpec,

    /// Problem dimension
    #[arg(long, default_value_t = 100)]
    n: usize,

    /// Mutation rate is c/n
    #[arg(long, default_value_t = 1.0)]
    c: f64,

    /// Success ratio of the (1:s+1)-rule
    #[arg(long, default_value_t = 0.5)]
    s: f64,

    /// Update strength F > 1
    #[arg(long = "F", default_value_t = 1.5)]
    f: f64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    algo: AlgoArgs,

    /// Initial population size
    #[arg(long, default_value_t = 1.0)]
    lambda_init: f64,

    /// Initial search point: uniform, zeromax<K>, explicit:<bits>
    #[arg(long, default_value = "uniform")]
    init: InitPolicy,

    /// Generation cap as a multiple of n
    #[arg(long, default_value_t = 500.0)]
    cap_multiplier: f64,

    /// Which step records to keep for --trajectory-out
    #[arg(long, value_enum, default_value_t = TrajectoryArg::Sampled)]
    trajectory: TrajectoryArg,

    /// Write kept step records to this CSV [default: not written]
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TrajectoryArg {
    Off,
    Sampled,
    Full,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML sweep config [default: none; one of --config or --preset is required]
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,

    /// Preset name: threshold, f-sweep, scaling, near-optimum [default: none]
    #[arg(long)]
    preset: Option<String>,

    /// Dimension for --preset
    #[arg(long, default_value_t = 1000)]
    n: usize,

    /// Override runs per cell [default: from the config or preset, 10]
    #[arg(long)]
    runs: Option<u64>,

    /// Output directory for raw.csv and summary.csv [default: the config's outputs, else none]
    #[arg(long)]
    out: Option<PathBuf>,

    /// Per-run wall-clock budget in seconds [default: off]
    #[arg(long)]
    run_time_budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    G1,
    G2,
    G3,
    G4,
}

#[derive(Debug, Args)]
struct DriftArgs {
    #[command(flatten)]
    algo: AlgoArgs,

    /// ZeroMax of the frozen state (zeros placed uniformly at random)
    #[arg(long = "Z", default_value_t = 10)]
    z: usize,

    /// Population size of the frozen state
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,

    /// Potential family
    #[arg(long, value_enum, default_value_t = FamilyArg::G1)]
    family: FamilyArg,

    /// Family constant K (K1, K2 or K4) [default: 1, or 20 for g4]
    #[arg(long)]
    k: Option<f64>,

    /// Monte-Carlo trials (at least 1000)
    #[arg(long, default_value_t = 100_000)]
    trials: u64,

    /// Truncation cap for the truncated G-drift [default: none]
    #[arg(long)]
    cap: Option<f64>,

    /// Confidence level of reported intervals
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Scan preset: g1 or g4
    #[arg(long, default_value = "g1")]
    preset: String,

    /// Override trials per cell [default: from the preset, 100000]
    #[arg(long)]
    trials: Option<u64>,

    /// Output directory for scan.csv and scan.json [default: none]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Monte-Carlo trials per event-probability grid point
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,

    /// Dominated pairs per function and generation in the monotonicity fuzz
    #[arg(long, default_value_t = 10_000)]
    pairs: u64,

    /// Random states per family in the sandwich check
    #[arg(long, default_value_t = 100_000)]
    states: u64,
}

#[derive(Debug, Args)]
struct PresetsArgs {
    /// Preset to print as TOML [default: list all]
    name: Option<String>,

    /// Dimension used when printing a preset
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

enum Failure {
    Usage(String),
    Aborted(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::HookViolation { .. } => Failure::Aborted(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure {w} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let seed = cli.seed.unwrap_or(0);
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a, seed),
        Command::Sweep(a) => cmd_sweep(a, cli.seed, cli.workers),
        Command::Drift(a) => cmd_drift(a, seed),
        Command::Scan(a) => cmd_scan(a, seed),
        Command::Verify(a) => cmd_verify(a, seed),
        Command::Presets(a) => cmd_presets(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Aborted(msg)) => {
            eprintln!("aborted: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn params(algo: &AlgoArgs) -> Result<AlgorithmParams, Failure> {
    Ok(AlgorithmParams::new(algo.n, algo.c, algo.s, algo.f)?)
}

fn cmd_run(a: RunArgs, seed: u64) -> CliResult {
    if a.cap_multiplier.is_nan() || a.cap_multiplier <= 0.0 {
        return Err(Failure::Usage("--cap-multiplier must be positive".into()));
    }
    let cap = (a.cap_multiplier * a.algo.n as f64).ceil() as u64;
    let p = params(&a.algo)?
        .with_lambda_init(a.lambda_init)?
        .with_generation_cap(cap);
    let trajectory = match (a.trajectory_out.is_some(), a.trajectory) {
        (false, _) | (_, TrajectoryArg::Off) => TrajectoryMode::Off,
        (true, TrajectoryArg::Sampled) => TrajectoryMode::Sampled,
        (true, TrajectoryArg::Full) => TrajectoryMode::Full,
    };
    let options = RunOptions {
        trajectory,
        deadline: None,
    };
    let r = run_with_options(
        &p,
        &a.algo.function,
        &RngStream::new(seed, 0),
        &a.init,
        &options,
    )?;
    println!(
        "function={} n={} c={} s={} F={} seed={} init={} generations={} evaluations={} hit_cap={} final_zeromax={} success_generations={} normalized_generations={}",
        a.algo.function.label(),
        p.n,
        p.c,
        p.s,
        p.f,
        seed,
        a.init.label(),
        r.generations,
        r.evaluations,
        r.hit_cap,
        r.final_zeromax,
        r.success_generations,
        r.generations as f64 / p.n as f64,
    );
    if let Some(path) = a.trajectory_out {
        let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::Usage(e.to_string()))?;
        for rec in &r.trajectory {
            w.serialize(rec)
                .map_err(|e| Failure::Usage(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, seed: Option<u64>, workers: Option<usize>) -> CliResult {
    let mut spec = match (&a.config, &a.preset) {
        (Some(path), _) => SweepSpec::from_toml_file(path)?,
        (None, Some(name)) => preset_by_name(name, a.n)?,
        (None, None) => {
            return Err(Failure::Usage(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    if let Some(r) = a.runs {
        spec.runs_per_cell = r;
    }
    if let Some(b) = a.run_time_budget {
        spec.run_time_budget_secs = Some(b);
    }
    if let Some(dir) = &a.out {
        spec.outputs = SweepOutputs::in_dir(dir);
    }
    let total = spec.cells().len() as u64 * spec.runs_per_cell;
    let done = std::sync::atomic::AtomicU64::new(0);
    let out = run_sweep_with_progress(&spec, workers, |_| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if k.is_multiple_of(10) || k == total {
            eprint!("\r{k}/{total} runs");
            if k == total {
                eprintln!();
            }
        }
    })?;
    for s in &out.summaries {
        println!(
            "{} n={} c={} s={} F={} runs={} mean_norm_generations={:.3} std={:.3} mean_evaluations={:.1} cap_fraction={}",
            s.function,
            s.n,
            s.c,
            s.s,
            s.f,
            s.runs,
            s.mean_norm_generations,
            s.std_norm_generations,
            s.mean_evaluations,
            s.cap_fraction
        );
    }
    for row in scaling_report(&out.summaries) {
        if let (Some(g), Some(e)) = (row.generations_ratio, row.evaluations_spread) {
            println!(
                "scaling {} c={} s={} F={} n={:?}: generations ratio {:.3}, evaluations/(n ln n) spread {:.3}",
                row.function, row.c, row.s, row.f, row.n_values, g, e
            );
        }
    }
    let errors = out.records.iter().filter(|r| r.is_error()).count();
    if errors > 0 {
        eprintln!("{errors} run(s) recorded an error");
    }
    for path in [&spec.outputs.raw, &spec.outputs.summary]
        .into_iter()
        .flatten()
    {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_drift(a: DriftArgs, seed: u64) -> CliResult {
    let p = params(&a.algo)?;
    let family = match (a.family, a.k) {
        (FamilyArg::G1, k) => Family::G1 {
            k1: k.unwrap_or(1.0),
        },
        (FamilyArg::G2, k) => Family::G2 {
            k2: k.unwrap_or(1.0),
        },
        (FamilyArg::G3, k) => Family::G3 {
            k1: k.unwrap_or(1.0),
            k2: 1.0,
            k3: 1.0,
        },
        (FamilyArg::G4, k) => Family::G4 {
            k4: k.unwrap_or(20.0),
        },
    };
    let pot = PotentialSpec::new(family, p.f, p.s, p.n)?;
    let rng = RngStream::new(seed, 0);
    let x = SearchPoint::with_zeromax(p.n, a.z, &mut rng.derive(StreamRole::Init))?;
    let d = estimate_drift(
        &x,
        a.lambda,
        &p,
        &a.algo.function,
        &pot,
        a.trials,
        a.cap,
        &rng,
    )?;
    let show = |name: &str, e: &sa_ea::DriftEstimate| -> Result<(), Failure> {
        let e = e.at_confidence(a.confidence)?;
        println!(
            "{name}: mean={:.6} se={:.6} ci=[{:.6}, {:.6}] verdict={}",
            e.mean,
            e.std_error,
            e.lower(),
            e.upper(),
            e.verdict().as_str()
        );
        Ok(())
    };
    println!(
        "state: function={} n={} Z={} lambda={} family={}{} trials={} success_rate={:.6}",
        a.algo.function.label(),
        p.n,
        a.z,
        a.lambda,
        family.name(),
        if d.reversed { " (reversed)" } else { "" },
        a.trials,
        d.success_rate
    );
    show("Z-drift", &d.z)?;
    show("H-drift", &d.h)?;
    show("G-drift", &d.g)?;
    if let Some(t) = &d.g_truncated {
        show("G-drift truncated", t)?;
    }
    Ok(())
}

fn cmd_scan(a: ScanArgs, seed: u64) -> CliResult {
    let mut preset = ScanPreset::by_name(&a.preset)?;
    if let Some(t) = a.trials {
        preset.trials = t;
    }
    let report = preset.run(&RngStream::new(seed, 0))?;
    for v in &report.verdicts {
        println!(
            "Z={} lambda={} verdict={} min_lower={:.6}",
            v.z,
            v.lambda,
            v.verdict.as_str(),
            v.min_lower
        );
    }
    println!(
        "{} scan: {}/{} cells positive at {} confidence",
        report.family,
        report.count(sa_ea::drift::Verdict::Positive),
        report.verdicts.len(),
        report.confidence
    );
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir)?;
        report.write_csv(&dir.join("scan.csv"))?;
        report.write_summary_json(&dir.join("scan.json"))?;
        eprintln!("wrote {}", dir.join("scan.csv").display());
        eprintln!("wrote {}", dir.join("scan.json").display());
    }
    Ok(())
}

fn line(report: &AuditReport) -> String {
    format!(
        "{}: {} checks, {} violations{}",
        report.name,
        report.checks,
        report.violations,
        report
            .examples
            .first()
            .map(|e| format!(" (first: {e})"))
            .unwrap_or_default()
    )
}

fn cmd_verify(a: VerifyArgs, seed: u64) -> CliResult {
    let rng = RngStream::new(seed, 0);
    let mut failed = Vec::new();

    let events = verify_event_probabilities(&default_event_grid(), a.trials, &rng)?;
    for row in &events.rows {
        let c = row.case;
        println!(
            "event n={} Z={} c={} k={}: A_bar exact={:.6} mc={:.6} {} | B_bar exact={:.6} mc={:.6} {}",
            c.n,
            c.z,
            c.c,
            c.offspring,
            row.a_bar.exact,
            row.a_bar.estimate,
            if row.a_bar.ok { "ok" } else { "FAIL" },
            row.b_bar.exact,
            row.b_bar.estimate,
            if row.b_bar.ok { "ok" } else { "FAIL" },
        );
    }
    if let Some((lo, hi)) = events.exponent_range {
        println!("fitted B_bar exponents in [{lo:.4}, {hi:.4}]");
    }
    if events.failures() > 0 {
        failed.push(format!(
            "{} event-probability mismatches",
            events.failures()
        ));
    }
    if !events.b_bar_monotone {
        failed.push("Pr[B_bar] not decreasing in offspring".into());
    }

    let mut reports = Vec::new();
    let functions = [
        FunctionSpec::OneMax,
        FunctionSpec::Binary,
        FunctionSpec::BinaryValue,
        FunctionSpec::DynamicBinVal,
        FunctionSpec::hot_topic_default(),
    ];
    for (i, f) in functions.iter().enumerate() {
        reports.push(monotonicity_fuzz(
            f,
            200,
            a.pairs,
            3,
            &rng.derive_indexed(StreamRole::Trial, i as u64),
        )?);
    }
    for family in [Family::g1(), Family::g2(), Family::g3()] {
        reports.push(sandwich_check(family, 1.5, 1.0, 100, a.states, &rng)?);
    }
    let p = AlgorithmParams::new(200, 1.0, 0.5, 1.5)?;
    for f in &functions {
        let (l, e) = replay_run(&p, f, &rng, &InitPolicy::UniformRandom)?;
        reports.push(l);
        reports.push(e);
    }
    for r in &reports {
        println!("{}", line(r));
        if !r.passed() {
            failed.push(r.name.clone());
        }
    }
    std::io::stdout().flush()?;
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Check(failed.join("; ")))
    }
}

fn cmd_presets(a: PresetsArgs) -> CliResult {
    match a.name {
        None => {
            for name in PRESET_NAMES {
                let spec = preset_by_name(name, a.n)?;
                println!(
                    "{name}: {} cells x {} runs",
                    spec.cells().len(),
                    spec.runs_per_cell
                );
            }
            for name in ["g1", "g4"] {
                let p = ScanPreset::by_name(name)?;
                println!(
                    "scan {name}: {} Z x {} lambda, {} trials per cell",
                    p.z_grid.len(),
                    p.lambda_grid.len(),
                    p.trials
                );
            }
        }
        Some(name) => print!("{}", preset_by_name(&name, a.n)?.to_toml()?),
    }
    Ok(())
}

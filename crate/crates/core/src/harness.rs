//! Seeded parameter sweeps with CSV persistence.
//!
//! A sweep is the Cartesian product `functions × n × c × s × F`, each cell
//! repeated `runs_per_cell` times. Every run draws from its own stream whose
//! id hashes the cell's parameters and the run index, so adding or removing
//! cells never changes the randomness of the others, and output is
//! identical for any worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ea::{
    run_on_instance, AlgorithmParams, InitPolicy, RunOptions, StopReason, TrajectoryMode,
};
use crate::error::{Error, Result};
use crate::fitness::{FitnessInstance, FunctionSpec};
use crate::rng::{derive_stream_id, mix64, RngStream, StreamRole};

/// Raw CSV header, in column order.
pub const RAW_HEADER: [&str; 15] = [
    "function",
    "n",
    "c",
    "s",
    "F",
    "run_index",
    "seed",
    "init",
    "generations",
    "evaluations",
    "hit_cap",
    "final_zeromax",
    "success_generations",
    "normalized_generations",
    "error",
];

/// Summary CSV header, in column order.
pub const SUMMARY_HEADER: [&str; 10] = [
    "function",
    "n",
    "c",
    "s",
    "F",
    "runs",
    "mean_norm_generations",
    "std_norm_generations",
    "mean_evaluations",
    "cap_fraction",
];

fn default_runs() -> u64 {
    10
}

fn default_cap_multiplier() -> f64 {
    crate::ea::DEFAULT_CAP_MULTIPLIER
}

fn default_lambda_init() -> f64 {
    1.0
}

mod init_str {
    use super::InitPolicy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(init: &InitPolicy, s: S) -> Result<S::Ok, S::Error> {
        match init {
            InitPolicy::Explicit(x) => s.serialize_str(&format!("explicit:{x}")),
            other => s.serialize_str(&other.label()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<InitPolicy, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a sweep writes its CSV files. Either may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOutputs {
    pub raw: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl SweepOutputs {
    /// `dir/raw.csv` and `dir/summary.csv`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            raw: Some(dir.join("raw.csv")),
            summary: Some(dir.join("summary.csv")),
        }
    }
}

/// A sweep configuration. Loadable from TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub functions: Vec<FunctionSpec>,
    pub n_list: Vec<usize>,
    pub c_list: Vec<f64>,
    pub s_list: Vec<f64>,
    #[serde(rename = "F_list")]
    pub f_list: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs_per_cell: u64,
    #[serde(default = "default_cap_multiplier")]
    pub generation_cap_multiplier: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, with = "init_str")]
    pub init: InitPolicy,
    #[serde(default = "default_lambda_init")]
    pub lambda_init: f64,
    /// Wall-clock limit per run in seconds. Runs exceeding it are recorded
    /// with an error and left out of the summary. Off by default.
    #[serde(default)]
    pub run_time_budget_secs: Option<f64>,
    #[serde(default)]
    pub outputs: SweepOutputs,
}

/// Parameters identifying one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub function: FunctionSpec,
    pub n: usize,
    pub c: f64,
    pub s: f64,
    pub f: f64,
}

impl Cell {
    /// Stream id of run `run_index` in this cell.
    pub fn stream_id(&self, run_index: u64) -> u64 {
        let label = self
            .function
            .label()
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
                (h ^ b as u64).wrapping_mul(0x0100_0000_01B3)
            });
        derive_stream_id(&[
            mix64(label),
            self.n as u64,
            self.c.to_bits(),
            self.s.to_bits(),
            self.f.to_bits(),
            run_index,
        ])
    }
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs_per_cell must be positive".into()));
        }
        if !(self.generation_cap_multiplier > 0.0) || !self.generation_cap_multiplier.is_finite() {
            return Err(Error::Config(
                "generation_cap_multiplier must be positive".into(),
            ));
        }
        if let Some(b) = self.run_time_budget_secs {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::Config(
                    "run_time_budget_secs must be positive".into(),
                ));
            }
        }
        for f in &self.functions {
            f.validate()?;
        }
        for cell in self.cells() {
            self.params_for(&cell)?;
        }
        Ok(())
    }

    /// Cells in output order: functions outermost, F innermost.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for function in &self.functions {
            for &n in &self.n_list {
                for &c in &self.c_list {
                    for &s in &self.s_list {
                        for &f in &self.f_list {
                            out.push(Cell {
                                function: function.clone(),
                                n,
                                c,
                                s,
                                f,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn params_for(&self, cell: &Cell) -> Result<AlgorithmParams> {
        let cap = (self.generation_cap_multiplier * cell.n as f64).ceil() as u64;
        Ok(AlgorithmParams::new(cell.n, cell.c, cell.s, cell.f)?
            .with_lambda_init(self.lambda_init)?
            .with_generation_cap(cap))
    }
}

/// One row of the raw CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub function: String,
    pub n: usize,
    pub c: f64,
    pub s: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub run_index: u64,
    pub seed: u64,
    pub init: String,
    pub generations: u64,
    pub evaluations: u64,
    pub hit_cap: bool,
    pub final_zeromax: usize,
    pub success_generations: u64,
    pub normalized_generations: f64,
    /// Empty unless the run aborted.
    pub error: String,
}

impl RunRecord {
    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }

    /// Checks the row-level invariants. Errored rows are exempt.
    pub fn validate(&self) -> Result<()> {
        if self.is_error() {
            return Ok(());
        }
        let fail = |msg: String| {
            Err(Error::MalformedRecord(format!(
                "{} n={} run {}: {msg}",
                self.function, self.n, self.run_index
            )))
        };
        if self.n == 0 {
            return fail("n = 0".into());
        }
        if !self.hit_cap && self.final_zeromax != 0 {
            return fail(format!(
                "not capped but final_zeromax = {}",
                self.final_zeromax
            ));
        }
        if self.hit_cap && self.final_zeromax == 0 {
            return fail("capped run ended at the optimum".into());
        }
        if self.evaluations < self.generations {
            return fail(format!(
                "evaluations {} < generations {}",
                self.evaluations, self.generations
            ));
        }
        if self.success_generations > self.generations {
            return fail("more successes than generations".into());
        }
        if self.normalized_generations != self.generations as f64 / self.n as f64 {
            return fail("normalized_generations != generations / n".into());
        }
        Ok(())
    }
}

/// One row of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub function: String,
    pub n: usize,
    pub c: f64,
    pub s: f64,
    #[serde(rename = "F")]
    pub f: f64,
    /// Runs without an error; only these enter the statistics.
    pub runs: u64,
    pub mean_norm_generations: f64,
    /// Unbiased (n−1) estimator; 0 for fewer than two runs.
    pub std_norm_generations: f64,
    pub mean_evaluations: f64,
    pub cap_fraction: f64,
}

fn summarize_group(rows: &mut [&RunRecord]) -> CellSummary {
    rows.sort_by_key(|r| r.run_index);
    let first = rows[0];
    let ok: Vec<&&RunRecord> = rows.iter().filter(|r| !r.is_error()).collect();
    let k = ok.len();
    let (mean, std, mean_eval, cap_fraction) = if k == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = ok.iter().map(|r| r.normalized_generations).sum::<f64>() / k as f64;
        let std = if k < 2 {
            0.0
        } else {
            (ok.iter()
                .map(|r| (r.normalized_generations - mean).powi(2))
                .sum::<f64>()
                / (k - 1) as f64)
                .sqrt()
        };
        let mean_eval = ok.iter().map(|r| r.evaluations as f64).sum::<f64>() / k as f64;
        let capped = ok.iter().filter(|r| r.hit_cap).count();
        (mean, std, mean_eval, capped as f64 / k as f64)
    };
    CellSummary {
        function: first.function.clone(),
        n: first.n,
        c: first.c,
        s: first.s,
        f: first.f,
        runs: k as u64,
        mean_norm_generations: mean,
        std_norm_generations: std,
        mean_evaluations: mean_eval,
        cap_fraction,
    }
}

/// Groups rows by cell, in first-appearance order, and aggregates each
/// group. The result does not depend on the order of rows within a cell.
pub fn summarize(records: &[RunRecord]) -> Vec<CellSummary> {
    let key = |r: &RunRecord| {
        (
            r.function.clone(),
            r.n,
            r.c.to_bits(),
            r.s.to_bits(),
            r.f.to_bits(),
        )
    };
    let mut order = Vec::new();
    let mut groups: BTreeMap<_, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let k = key(r);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| summarize_group(groups.get_mut(&k).expect("key was inserted")))
        .collect()
}

/// Records and summaries of a finished sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<CellSummary>,
}

fn run_one(spec: &SweepSpec, cell: &Cell, run_index: u64) -> RunRecord {
    let seed = cell.stream_id(run_index);
    let mut record = RunRecord {
        function: cell.function.label(),
        n: cell.n,
        c: cell.c,
        s: cell.s,
        f: cell.f,
        run_index,
        seed,
        init: spec.init.label(),
        generations: 0,
        evaluations: 0,
        hit_cap: false,
        final_zeromax: 0,
        success_generations: 0,
        normalized_generations: 0.0,
        error: String::new(),
    };
    let options = RunOptions {
        trajectory: TrajectoryMode::Off,
        deadline: spec
            .run_time_budget_secs
            .map(|b| Instant::now() + Duration::from_secs_f64(b)),
    };
    let stream = RngStream::new(spec.master_seed, seed);
    let result = spec.params_for(cell).and_then(|params| {
        let instance = FitnessInstance::new(
            &cell.function,
            cell.n,
            &mut stream.derive_indexed(StreamRole::Environment, 0),
        )?;
        run_on_instance(&params, instance, &stream, &spec.init, &options, |_| {})
    });
    match result {
        Ok(r) if r.stop == StopReason::Deadline => {
            record.generations = r.generations;
            record.evaluations = r.evaluations;
            record.final_zeromax = r.final_zeromax;
            record.error = format!("time budget exceeded after {} generations", r.generations);
        }
        Ok(r) => {
            record.generations = r.generations;
            record.evaluations = r.evaluations;
            record.hit_cap = r.hit_cap;
            record.final_zeromax = r.final_zeromax;
            record.success_generations = r.success_generations;
            record.normalized_generations = r.generations as f64 / cell.n as f64;
        }
        Err(e) => record.error = e.to_string(),
    }
    record
}

/// Runs every cell of `spec`, writes the configured outputs and returns
/// records in (cell, run_index) order. `workers = None` uses all cores.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepOutcome> {
    run_sweep_with_progress(spec, workers, |_| {})
}

/// [`run_sweep`] calling `progress` as each run finishes (in completion
/// order, possibly from several threads).
pub fn run_sweep_with_progress(
    spec: &SweepSpec,
    workers: Option<usize>,
    progress: impl Fn(&RunRecord) + Sync,
) -> Result<SweepOutcome> {
    spec.validate()?;
    for path in [&spec.outputs.raw, &spec.outputs.summary]
        .into_iter()
        .flatten()
    {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
    }
    let cells = spec.cells();
    let jobs: Vec<(&Cell, u64)> = cells
        .iter()
        .flat_map(|c| (0..spec.runs_per_cell).map(move |r| (c, r)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, r)| {
                let rec = run_one(spec, cell, r);
                progress(&rec);
                rec
            })
            .collect()
    });
    let summaries = summarize(&records);
    if let Some(path) = &spec.outputs.raw {
        write_raw_csv(path, &records)?;
    }
    if let Some(path) = &spec.outputs.summary {
        write_summary_csv(path, &summaries)?;
    }
    Ok(SweepOutcome { records, summaries })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_rows(path, records, &RAW_HEADER)
}

pub fn write_summary_csv(path: &Path, summaries: &[CellSummary]) -> Result<()> {
    write_rows(path, summaries, &SUMMARY_HEADER)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::MalformedRecord(format!(
            "{}: header `{}` does not match `{}`",
            path.display(),
            found.join(","),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        out.push(row.map_err(|e| {
            Error::MalformedRecord(format!("{} row {}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

/// Reads a raw CSV and revalidates every row. Capped rows of the same
/// (function, n) must agree on the cap.
pub fn load_raw_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let rows: Vec<RunRecord> = read_rows(path, &RAW_HEADER)?;
    let mut caps: BTreeMap<(String, usize), u64> = BTreeMap::new();
    for r in &rows {
        r.validate()?;
        if r.hit_cap && !r.is_error() {
            let cap = *caps
                .entry((r.function.clone(), r.n))
                .or_insert(r.generations);
            if cap != r.generations {
                return Err(Error::MalformedRecord(format!(
                    "{} n={} run {}: capped at {} but another run capped at {cap}",
                    r.function, r.n, r.run_index, r.generations
                )));
            }
        }
    }
    Ok(rows)
}

pub fn load_summary_csv(path: &Path) -> Result<Vec<CellSummary>> {
    read_rows(path, &SUMMARY_HEADER)
}

/// Ratios across `n` for one (function, c, s, F) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub function: String,
    pub c: f64,
    pub s: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub n_values: Vec<usize>,
    /// Mean normalized generations at the largest n over that at the smallest.
    pub generations_ratio: Option<f64>,
    /// `max / min` of `mean_evaluations / (n ln n)` over the n values.
    pub evaluations_spread: Option<f64>,
    /// Set when fewer than two n values are present.
    pub note: Option<String>,
}

/// Scaling ratios per (function, c, s, F) group of a summary.
pub fn scaling_report(summaries: &[CellSummary]) -> Vec<ScalingRow> {
    let mut groups: BTreeMap<(String, u64, u64, u64), Vec<&CellSummary>> = BTreeMap::new();
    for s in summaries {
        groups
            .entry((
                s.function.clone(),
                s.c.to_bits(),
                s.s.to_bits(),
                s.f.to_bits(),
            ))
            .or_default()
            .push(s);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.sort_by_key(|s| s.n);
            let first = g[0];
            let n_values: Vec<usize> = g.iter().map(|s| s.n).collect();
            let (generations_ratio, evaluations_spread, note) = if g.len() < 2 {
                (None, None, Some("single n value: no ratios".to_string()))
            } else {
                let last = g[g.len() - 1];
                let per_nlogn: Vec<f64> = g
                    .iter()
                    .map(|s| s.mean_evaluations / (s.n as f64 * (s.n as f64).ln()))
                    .collect();
                let max = per_nlogn.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = per_nlogn.iter().copied().fold(f64::INFINITY, f64::min);
                (
                    Some(last.mean_norm_generations / first.mean_norm_generations),
                    Some(max / min),
                    None,
                )
            };
            ScalingRow {
                function: first.function.clone(),
                c: first.c,
                s: first.s,
                f: first.f,
                n_values,
                generations_ratio,
                evaluations_spread,
                note,
            }
        })
        .collect()
}

/// s grid of the threshold preset: 0.5 to 10, refined on [2.5, 4.5].
pub fn threshold_s_grid() -> Vec<f64> {
    vec![
        0.5, 1.0, 1.5, 2.0, 2.5, 2.75, 3.0, 3.1, 3.2, 3.3, 3.4, 3.5, 3.6, 3.75, 4.0, 4.25, 4.5,
        5.0, 6.0, 7.0, 8.0, 9.0, 10.0,
    ]
}

/// F grid of the F-sweep preset.
pub fn f_sweep_grid() -> Vec<f64> {
    vec![
        1.1, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.25, 8.0, 11.0, 16.0, 22.0, 32.0,
    ]
}

fn base_spec(
    functions: Vec<FunctionSpec>,
    n_list: Vec<usize>,
    c_list: Vec<f64>,
    s_list: Vec<f64>,
    f_list: Vec<f64>,
) -> SweepSpec {
    SweepSpec {
        functions,
        n_list,
        c_list,
        s_list,
        f_list,
        runs_per_cell: default_runs(),
        generation_cap_multiplier: default_cap_multiplier(),
        master_seed: 0,
        init: InitPolicy::UniformRandom,
        lambda_init: 1.0,
        run_time_budget_secs: None,
        outputs: SweepOutputs::default(),
    }
}

/// Generations versus s: `F = 1.5`, `c = 1`, 10 runs, `500n` cap.
pub fn preset_threshold_sweep(n: usize, functions: Vec<FunctionSpec>) -> SweepSpec {
    base_spec(functions, vec![n], vec![1.0], threshold_s_grid(), vec![1.5])
}

/// Generations versus F on DynamicBinVal: `s = 1.8`, `c ∈ {0.98, 1}`.
pub fn preset_f_sweep(n: usize) -> SweepSpec {
    base_spec(
        vec![FunctionSpec::DynamicBinVal],
        vec![n],
        vec![0.98, 1.0],
        vec![1.8],
        f_sweep_grid(),
    )
}

/// One algorithm cell over several n.
pub fn preset_scaling_experiment(
    function: FunctionSpec,
    c: f64,
    s: f64,
    f: f64,
    n_list: Vec<usize>,
    init: InitPolicy,
) -> SweepSpec {
    SweepSpec {
        init,
        ..base_spec(vec![function], n_list, vec![c], vec![s], vec![f])
    }
}

/// Names accepted by [`preset_by_name`].
pub const PRESET_NAMES: [&str; 4] = ["threshold", "f-sweep", "scaling", "near-optimum"];

/// A named preset at dimension `n`.
///
/// - `threshold`: OneMax, Binary, BinaryValue, DynamicBinVal, HotTopic.
/// - `f-sweep`: see [`preset_f_sweep`].
/// - `scaling`: OneMax, `c = 0.8`, `s = 0.5`, `F = 1.5`, at `n/4, n/2, n`.
/// - `near-optimum`: OneMax, `c = 0.8`, `s = 30`, `F = 1.5`, ten zero-bits.
pub fn preset_by_name(name: &str, n: usize) -> Result<SweepSpec> {
    match name {
        "threshold" => Ok(preset_threshold_sweep(
            n,
            vec![
                FunctionSpec::OneMax,
                FunctionSpec::Binary,
                FunctionSpec::BinaryValue,
                FunctionSpec::DynamicBinVal,
                FunctionSpec::hot_topic_default(),
            ],
        )),
        "f-sweep" | "f_sweep" => Ok(preset_f_sweep(n)),
        "scaling" => Ok(preset_scaling_experiment(
            FunctionSpec::OneMax,
            0.8,
            0.5,
            1.5,
            vec![(n / 4).max(1), (n / 2).max(1), n],
            InitPolicy::UniformRandom,
        )),
        "near-optimum" => Ok(preset_scaling_experiment(
            FunctionSpec::OneMax,
            0.8,
            30.0,
            1.5,
            vec![n],
            InitPolicy::FixedZeromax(10.min(n)),
        )),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

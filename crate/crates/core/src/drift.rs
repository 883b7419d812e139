//! Monte-Carlo estimation of one-step drifts, success probabilities and the
//! target population size λ*.
//!
//! A drift estimate freezes a state `(x, λ)` and repeats a single generation
//! from it many times. Dynamic environments are redrawn for every trial, so
//! the estimate targets `E[· | x, λ]` rather than a single sampled `f^t`.
//!
//! Trials are cut into fixed-size batches. Batch `b` always draws from the
//! stream `rng.derive_indexed(Trial, b)` and batch statistics are merged in a
//! fixed pairwise tree, so results do not depend on the thread count.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bitstring::{BitFlipSampler, SearchPoint};
use crate::ea::{round_offspring, AlgorithmParams, AlgorithmState, Stepper};
use crate::error::{invalid, Result};
use crate::fitness::{FitnessInstance, FunctionSpec};
use crate::potentials::{prob_a_bar, prob_b_bar, Family, PotentialSpec};
use crate::rng::{derive_stream_id, RngStream, StreamRole};

/// Trials per batch; also the unit of parallel work.
const BATCH: u64 = 1024;

/// Smallest accepted trial count for drift estimates.
pub const MIN_DRIFT_TRIALS: u64 = 1000;

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Two-sided standard normal quantile for a confidence level.
pub fn z_quantile(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(
            "confidence",
            format!("need 0 < confidence < 1, got {confidence}"),
        ));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

/// Running mean and sum of squared deviations, mergeable in any tree shape.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    max: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        if self.count == 0 || v > self.max {
            self.max = v;
        }
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let d = b.mean - a.mean;
        let wb = b.count as f64 / count as f64;
        Moments {
            count,
            mean: a.mean + d * wb,
            m2: a.m2 + b.m2 + d * d * a.count as f64 * wb,
            max: a.max.max(b.max),
        }
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

fn reduce_pairwise<T: Copy>(items: &[T], merge: &impl Fn(T, T) -> T, empty: T) -> T {
    match items.len() {
        0 => empty,
        1 => items[0],
        len => {
            let (l, r) = items.split_at(len / 2);
            merge(
                reduce_pairwise(l, merge, empty),
                reduce_pairwise(r, merge, empty),
            )
        }
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: u64,
    pub confidence: f64,
    pub truncation_cap: Option<f64>,
}

/// Sign of an estimate at its confidence level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Positive,
    Negative,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Positive => "positive",
            Verdict::Negative => "negative",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl DriftEstimate {
    fn from_moments(m: &Moments, confidence: f64, cap: Option<f64>) -> Self {
        Self {
            mean: m.mean,
            std_error: m.std_error(),
            trials: m.count,
            confidence,
            truncation_cap: cap,
        }
    }

    pub fn half_width(&self) -> f64 {
        z_quantile(self.confidence).unwrap_or(f64::NAN) * self.std_error
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width()
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width()
    }

    pub fn verdict(&self) -> Verdict {
        if self.lower() > 0.0 {
            Verdict::Positive
        } else if self.upper() < 0.0 {
            Verdict::Negative
        } else {
            Verdict::Inconclusive
        }
    }

    /// The same estimate judged at another confidence level.
    pub fn at_confidence(&self, confidence: f64) -> Result<Self> {
        z_quantile(confidence)?;
        Ok(Self {
            confidence,
            ..*self
        })
    }
}

/// Drift of ZeroMax, of the penalty `h` and of `g = ZeroMax + h`.
///
/// Samples are `Z - Z'`, `h(λ) - h(λ')` and their sum, so positive means
/// progress towards the optimum. Reversed families (G4) report the negated
/// samples `Z' - Z`, `h(λ') - h(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftTriple {
    pub z: DriftEstimate,
    pub h: DriftEstimate,
    /// Mean is `z.mean + h.mean` exactly.
    pub g: DriftEstimate,
    /// Estimate of `E[min{cap, G-sample}]`, present when a cap was given.
    pub g_truncated: Option<DriftEstimate>,
    /// Largest G-sample seen.
    pub g_max_sample: f64,
    pub success_rate: f64,
    pub reversed: bool,
}

/// One trial of a drift experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftSample {
    pub success: bool,
    pub zeromax_before: usize,
    pub zeromax_after: usize,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub z: f64,
    pub h: f64,
    pub g: f64,
}

struct Frozen<'a> {
    params: &'a AlgorithmParams,
    instance: &'a FitnessInstance,
    pot: &'a PotentialSpec,
    state: AlgorithmState,
    h0: f64,
    sign: f64,
}

impl<'a> Frozen<'a> {
    fn new(
        x: &SearchPoint,
        lambda: f64,
        params: &'a AlgorithmParams,
        instance: &'a FitnessInstance,
        pot: &'a PotentialSpec,
    ) -> Result<Self> {
        params.validate()?;
        x.check_len(params.n)?;
        if instance.n() != params.n {
            return Err(crate::Error::DimensionMismatch {
                expected: params.n,
                actual: instance.n(),
            });
        }
        if pot.n != params.n || pot.f != params.f || pot.s != params.s {
            return Err(invalid(
                "potential",
                "potential (n, F, s) must match the algorithm parameters",
            ));
        }
        let state = AlgorithmState::new(x.clone(), lambda)?;
        if state.zeromax == 0 {
            return Err(invalid("x", "drift is undefined at the optimum"));
        }
        Ok(Self {
            params,
            instance,
            pot,
            h0: pot.h(lambda)?,
            state,
            sign: if pot.family.reversed() { -1.0 } else { 1.0 },
        })
    }

    fn batch(
        &self,
        rng: &mut RngStream,
        count: u64,
        mut sink: impl FnMut(DriftSample),
    ) -> Result<()> {
        let mut stepper = Stepper::new(self.params)?;
        let dynamic = self.instance.spec().is_dynamic();
        for _ in 0..count {
            let mut st = self.state.clone();
            let rec = if dynamic {
                let env = self.instance.advance(0, &st.x, rng)?;
                stepper.step(&mut st, &env, rng)?
            } else {
                stepper.step(&mut st, self.instance, rng)?
            };
            let h1 = self.pot.h_unchecked(rec.lambda_after);
            let z = self.sign * (rec.zeromax_before as f64 - rec.zeromax_after as f64);
            let h = self.sign * (self.h0 - h1);
            sink(DriftSample {
                success: rec.success,
                zeromax_before: rec.zeromax_before,
                zeromax_after: rec.zeromax_after,
                lambda_before: rec.lambda_before,
                lambda_after: rec.lambda_after,
                z,
                h,
                g: z + h,
            });
        }
        Ok(())
    }
}

fn batch_sizes(trials: u64) -> Vec<u64> {
    let full = trials / BATCH;
    let mut sizes = vec![BATCH; full as usize];
    if !trials.is_multiple_of(BATCH) {
        sizes.push(trials % BATCH);
    }
    sizes
}

#[derive(Debug, Clone, Copy, Default)]
struct BatchStats {
    z: Moments,
    h: Moments,
    g: Moments,
    g_trunc: Moments,
    successes: u64,
}

impl BatchStats {
    fn merge(a: BatchStats, b: BatchStats) -> BatchStats {
        BatchStats {
            z: Moments::merge(a.z, b.z),
            h: Moments::merge(a.h, b.h),
            g: Moments::merge(a.g, b.g),
            g_trunc: Moments::merge(a.g_trunc, b.g_trunc),
            successes: a.successes + b.successes,
        }
    }
}

/// Drift estimate on an explicit instance. Dynamic instances are advanced
/// afresh in every trial.
#[allow(clippy::too_many_arguments)]
pub fn estimate_drift_on(
    x: &SearchPoint,
    lambda: f64,
    params: &AlgorithmParams,
    instance: &FitnessInstance,
    pot: &PotentialSpec,
    trials: u64,
    cap: Option<f64>,
    rng: &RngStream,
) -> Result<DriftTriple> {
    if trials < MIN_DRIFT_TRIALS {
        return Err(invalid(
            "trials",
            format!("need at least {MIN_DRIFT_TRIALS} trials, got {trials}"),
        ));
    }
    if let Some(c) = cap {
        if c.is_nan() {
            return Err(invalid("cap", "truncation cap is NaN"));
        }
    }
    let frozen = Frozen::new(x, lambda, params, instance, pot)?;
    let sizes = batch_sizes(trials);
    let stats: Vec<BatchStats> = sizes
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut rng = rng.derive_indexed(StreamRole::Trial, b as u64);
            let mut acc = BatchStats::default();
            frozen.batch(&mut rng, count, |s| {
                acc.z.push(s.z);
                acc.h.push(s.h);
                acc.g.push(s.g);
                if let Some(c) = cap {
                    acc.g_trunc.push(s.g.min(c));
                }
                acc.successes += s.success as u64;
            })?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = reduce_pairwise(&stats, &BatchStats::merge, BatchStats::default());

    let conf = DEFAULT_CONFIDENCE;
    let z = DriftEstimate::from_moments(&total.z, conf, None);
    let h = DriftEstimate::from_moments(&total.h, conf, None);
    let mut g = DriftEstimate::from_moments(&total.g, conf, None);
    g.mean = z.mean + h.mean;
    let g_truncated = cap.map(|c| {
        if total.g.max <= c {
            DriftEstimate {
                truncation_cap: Some(c),
                ..g
            }
        } else {
            DriftEstimate::from_moments(&total.g_trunc, conf, Some(c))
        }
    });
    Ok(DriftTriple {
        z,
        h,
        g,
        g_truncated,
        g_max_sample: total.g.max,
        success_rate: total.successes as f64 / trials as f64,
        reversed: frozen.sign < 0.0,
    })
}

/// One-step drift of `Z`, `h` and `g` from the frozen state `(x, λ)`.
///
/// The base instance is drawn from `rng.derive(Environment)`. Estimates are
/// reported at 95% confidence; see [`DriftEstimate::at_confidence`].
#[allow(clippy::too_many_arguments)]
pub fn estimate_drift(
    x: &SearchPoint,
    lambda: f64,
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    pot: &PotentialSpec,
    trials: u64,
    cap: Option<f64>,
    rng: &RngStream,
) -> Result<DriftTriple> {
    let instance = FitnessInstance::new(spec, params.n, &mut rng.derive(StreamRole::Environment))?;
    estimate_drift_on(x, lambda, params, &instance, pot, trials, cap, rng)
}

/// Per-trial samples, for instrumentation. Runs serially.
#[allow(clippy::too_many_arguments)]
pub fn drift_samples(
    x: &SearchPoint,
    lambda: f64,
    params: &AlgorithmParams,
    instance: &FitnessInstance,
    pot: &PotentialSpec,
    trials: u64,
    rng: &RngStream,
) -> Result<Vec<DriftSample>> {
    let frozen = Frozen::new(x, lambda, params, instance, pot)?;
    let mut out = Vec::with_capacity(trials as usize);
    for (b, count) in batch_sizes(trials).into_iter().enumerate() {
        let mut rng = rng.derive_indexed(StreamRole::Trial, b as u64);
        frozen.batch(&mut rng, count, |s| out.push(s))?;
    }
    Ok(out)
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbEstimate {
    pub p: f64,
    pub std_error: f64,
    pub successes: u64,
    pub trials: u64,
}

impl ProbEstimate {
    fn new(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            successes,
            trials,
        }
    }
}

/// Fraction of trials in which the best of `⌊λ⌉` offspring strictly beats
/// the parent, on an explicit instance.
pub fn estimate_success_prob_on(
    x: &SearchPoint,
    lambda: f64,
    params: &AlgorithmParams,
    instance: &FitnessInstance,
    trials: u64,
    rng: &RngStream,
) -> Result<ProbEstimate> {
    if trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    // any potential works here; only the success flag is read
    let pot = PotentialSpec::new(Family::g1(), params.f, params.s, params.n)?;
    let frozen = Frozen::new(x, lambda, params, instance, &pot)?;
    let counts: Vec<u64> = batch_sizes(trials)
        .par_iter()
        .enumerate()
        .map(|(b, &count)| {
            let mut rng = rng.derive_indexed(StreamRole::Trial, b as u64);
            let mut hits = 0u64;
            frozen.batch(&mut rng, count, |s| hits += s.success as u64)?;
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    Ok(ProbEstimate::new(counts.iter().sum(), trials))
}

/// [`estimate_success_prob_on`] with the instance drawn from
/// `rng.derive(Environment)`.
pub fn estimate_success_prob(
    x: &SearchPoint,
    lambda: f64,
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    trials: u64,
    rng: &RngStream,
) -> Result<ProbEstimate> {
    let instance = FitnessInstance::new(spec, params.n, &mut rng.derive(StreamRole::Environment))?;
    estimate_success_prob_on(x, lambda, params, &instance, trials, rng)
}

/// Result of a λ* search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaStar {
    /// Smallest probed offspring count whose estimated success probability
    /// reaches `target`.
    pub offspring: u64,
    /// Set when a single offspring already reaches the target.
    pub boundary: bool,
    /// `1/(s+1)`.
    pub target: f64,
    pub trials_per_probe: u64,
    /// Every probe in search order.
    pub probes: Vec<(u64, ProbEstimate)>,
}

/// Largest offspring count the λ* search will probe.
pub const LAMBDA_STAR_LIMIT: u64 = 1 << 24;

/// Locates the target population size by doubling and bisection. Each probe
/// uses enough trials that the 95% interval half-width is at most `tol` for
/// any success probability.
pub fn find_lambda_star(
    x: &SearchPoint,
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    tol: f64,
    rng: &RngStream,
) -> Result<LambdaStar> {
    if !(tol > 0.0 && tol < 0.5) {
        return Err(invalid("tol", format!("need 0 < tol < 0.5, got {tol}")));
    }
    let instance = FitnessInstance::new(spec, params.n, &mut rng.derive(StreamRole::Environment))?;
    let z = z_quantile(DEFAULT_CONFIDENCE)?;
    let trials = ((z * 0.5 / tol).powi(2).ceil() as u64).max(MIN_DRIFT_TRIALS);
    let target = 1.0 / (params.s + 1.0);
    let mut probes = Vec::new();
    let mut probe = |k: u64| -> Result<bool> {
        let est = estimate_success_prob_on(
            x,
            k as f64,
            params,
            &instance,
            trials,
            &rng.derive_indexed(StreamRole::Trial, k),
        )?;
        probes.push((k, est));
        Ok(est.p >= target)
    };

    if probe(1)? {
        return Ok(LambdaStar {
            offspring: 1,
            boundary: true,
            target,
            trials_per_probe: trials,
            probes,
        });
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while !probe(hi)? {
        lo = hi;
        hi *= 2;
        if hi > LAMBDA_STAR_LIMIT {
            return Err(invalid(
                "x",
                format!(
                    "success probability stays below {target} up to {LAMBDA_STAR_LIMIT} offspring"
                ),
            ));
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LambdaStar {
        offspring: hi,
        boundary: false,
        target,
        trials_per_probe: trials,
        probes,
    })
}

/// Options for [`scan_drift_region`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanOptions {
    pub confidence: f64,
    /// Trials may grow ×4 per round up to this many while a cell's
    /// interval still contains zero.
    pub max_trials: u64,
    /// Representatives per Z for functions that are not permutation
    /// symmetric. Symmetric functions always use one.
    pub representatives: usize,
    pub cap: Option<f64>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            confidence: DEFAULT_CONFIDENCE,
            max_trials: 1 << 22,
            representatives: 16,
            cap: None,
        }
    }
}

/// One (Z, λ, representative) cell of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCell {
    pub z: usize,
    pub lambda: f64,
    pub offspring: u64,
    pub representative: usize,
    pub drift: DriftTriple,
    pub verdict: Verdict,
}

/// Worst verdict over the representatives of one (Z, λ) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellVerdict {
    pub z: usize,
    pub lambda: f64,
    pub verdict: Verdict,
    /// Smallest lower confidence bound of the G-drift.
    pub min_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftScanReport {
    pub function: String,
    pub family: String,
    pub reversed: bool,
    pub n: usize,
    pub c: f64,
    pub s: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub confidence: f64,
    pub cells: Vec<ScanCell>,
    pub verdicts: Vec<CellVerdict>,
}

/// Header of [`DriftScanReport::write_csv`].
pub const SCAN_CSV_HEADER: [&str; 16] = [
    "z",
    "lambda",
    "offspring",
    "representative",
    "trials",
    "z_drift",
    "z_se",
    "h_drift",
    "h_se",
    "g_drift",
    "g_se",
    "g_lower",
    "g_upper",
    "g_truncated",
    "success_rate",
    "verdict",
];

impl DriftScanReport {
    pub fn all_positive(&self) -> bool {
        self.verdicts.iter().all(|v| v.verdict == Verdict::Positive)
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.verdicts
            .iter()
            .filter(|v| v.verdict == verdict)
            .count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(SCAN_CSV_HEADER)?;
        for cell in &self.cells {
            let d = &cell.drift;
            w.write_record([
                cell.z.to_string(),
                cell.lambda.to_string(),
                cell.offspring.to_string(),
                cell.representative.to_string(),
                d.g.trials.to_string(),
                d.z.mean.to_string(),
                d.z.std_error.to_string(),
                d.h.mean.to_string(),
                d.h.std_error.to_string(),
                d.g.mean.to_string(),
                d.g.std_error.to_string(),
                d.g.lower().to_string(),
                d.g.upper().to_string(),
                d.g_truncated
                    .map(|t| t.mean.to_string())
                    .unwrap_or_default(),
                d.success_rate.to_string(),
                cell.verdict.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Verdict summary as JSON.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "function": self.function,
            "family": self.family,
            "reversed": self.reversed,
            "n": self.n,
            "c": self.c,
            "s": self.s,
            "F": self.f,
            "confidence": self.confidence,
            "cells": self.verdicts.len(),
            "positive": self.count(Verdict::Positive),
            "negative": self.count(Verdict::Negative),
            "inconclusive": self.count(Verdict::Inconclusive),
            "all_positive": self.all_positive(),
            "verdicts": self.verdicts,
        })
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &self.summary_json())?;
        writeln!(f)?;
        Ok(())
    }
}

/// Estimates drift on every `(Z, λ)` pair of the grids and judges the sign
/// of the G-drift (the reversed G-drift for G4).
///
/// Representatives are all-ones strings with `Z` uniformly random zeros.
#[allow(clippy::too_many_arguments)]
pub fn scan_drift_region(
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    pot: &PotentialSpec,
    z_grid: &[usize],
    lambda_grid: &[f64],
    trials: u64,
    rng: &RngStream,
    options: &ScanOptions,
) -> Result<DriftScanReport> {
    z_quantile(options.confidence)?;
    for &z in z_grid {
        if z == 0 || z > params.n {
            return Err(invalid("Z_grid", format!("need 1 <= Z <= n, got {z}")));
        }
    }
    for &l in lambda_grid {
        round_offspring(l)?;
    }
    let instance = FitnessInstance::new(spec, params.n, &mut rng.derive(StreamRole::Environment))?;
    let reps = if spec.is_symmetric() {
        1
    } else {
        options.representatives.max(1)
    };

    let jobs: Vec<(usize, f64, usize)> = z_grid
        .iter()
        .flat_map(|&z| {
            lambda_grid
                .iter()
                .flat_map(move |&l| (0..reps).map(move |r| (z, l, r)))
        })
        .collect();

    let cells: Vec<ScanCell> = jobs
        .par_iter()
        .map(|&(z, lambda, rep)| {
            let x_rng =
                rng.derive_indexed(StreamRole::Init, derive_stream_id(&[z as u64, rep as u64]));
            let x = SearchPoint::with_zeromax(params.n, z, &mut x_rng.clone())?;
            let cell_id = derive_stream_id(&[z as u64, lambda.to_bits(), rep as u64]);
            let mut t = trials;
            let mut round = 0u64;
            loop {
                let cell_rng =
                    rng.derive_indexed(StreamRole::Trial, derive_stream_id(&[cell_id, round]));
                let drift = estimate_drift_on(
                    &x,
                    lambda,
                    params,
                    &instance,
                    pot,
                    t,
                    options.cap,
                    &cell_rng,
                )?;
                let drift = DriftTriple {
                    z: drift.z.at_confidence(options.confidence)?,
                    h: drift.h.at_confidence(options.confidence)?,
                    g: drift.g.at_confidence(options.confidence)?,
                    g_truncated: drift
                        .g_truncated
                        .map(|e| e.at_confidence(options.confidence))
                        .transpose()?,
                    ..drift
                };
                let verdict = drift.g.verdict();
                if verdict != Verdict::Inconclusive || t.saturating_mul(4) > options.max_trials {
                    return Ok(ScanCell {
                        z,
                        lambda,
                        offspring: round_offspring(lambda)?,
                        representative: rep,
                        drift,
                        verdict,
                    });
                }
                t *= 4;
                round += 1;
            }
        })
        .collect::<Result<_>>()?;

    let mut verdicts = Vec::new();
    for &z in z_grid {
        for &l in lambda_grid {
            let group = cells.iter().filter(|c| c.z == z && c.lambda == l);
            let worst = group
                .min_by(|a, b| a.drift.g.lower().total_cmp(&b.drift.g.lower()))
                .expect("every grid pair has at least one representative");
            let verdict = if cells
                .iter()
                .filter(|c| c.z == z && c.lambda == l)
                .all(|c| c.verdict == Verdict::Positive)
            {
                Verdict::Positive
            } else {
                worst.verdict
            };
            verdicts.push(CellVerdict {
                z,
                lambda: l,
                verdict,
                min_lower: worst.drift.g.lower(),
            });
        }
    }

    Ok(DriftScanReport {
        function: spec.label(),
        family: pot.family.name().to_string(),
        reversed: pot.family.reversed(),
        n: params.n,
        c: params.c,
        s: params.s,
        f: params.f,
        confidence: options.confidence,
        cells,
        verdicts,
    })
}

/// A ready-made scan configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPreset {
    pub name: String,
    pub params: AlgorithmParams,
    pub spec: FunctionSpec,
    pub potential: PotentialSpec,
    pub z_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub trials: u64,
    pub options: ScanOptions,
}

impl ScanPreset {
    /// Small-s regime: OneMax, `s = 0.1`, `c = 0.8`, `F = 1.5`, `n = 1000`,
    /// G1 with `K1 = 1`, Z in {1, 10, 100, 500, 900}, λ = 1, 2, 4, …, 512.
    pub fn g1() -> Result<Self> {
        let params = AlgorithmParams::new(1000, 0.8, 0.1, 1.5)?;
        Ok(Self {
            name: "g1".into(),
            potential: PotentialSpec::new(Family::g1(), params.f, params.s, params.n)?,
            spec: FunctionSpec::OneMax,
            z_grid: vec![1, 10, 100, 500, 900],
            lambda_grid: (0..10).map(|i| f64::from(1u32 << i)).collect(),
            trials: 100_000,
            options: ScanOptions::default(),
            params,
        })
    }

    /// Large-s regime: OneMax, `s = 30`, `c = 0.8`, `F = 1.5`, `n = 1000`,
    /// G4 with `K4 = 20`, Z in {450, 460, …, 500}, λ in {F, F², F³, F⁴}.
    pub fn g4() -> Result<Self> {
        let params = AlgorithmParams::new(1000, 0.8, 30.0, 1.5)?;
        Ok(Self {
            name: "g4".into(),
            potential: PotentialSpec::new(Family::g4(), params.f, params.s, params.n)?,
            spec: FunctionSpec::OneMax,
            z_grid: (450..=500).step_by(10).collect(),
            lambda_grid: (1..=4).map(|i| params.f.powi(i)).collect(),
            trials: 100_000,
            options: ScanOptions::default(),
            params,
        })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "g1" => Self::g1(),
            "g4" => Self::g4(),
            other => Err(crate::Error::Config(format!(
                "unknown scan preset `{other}` (expected g1 or g4)"
            ))),
        }
    }

    pub fn run(&self, rng: &RngStream) -> Result<DriftScanReport> {
        scan_drift_region(
            &self.params,
            &self.spec,
            &self.potential,
            &self.z_grid,
            &self.lambda_grid,
            self.trials,
            rng,
            &self.options,
        )
    }
}

/// One `(n, Z, c, offspring)` point of the event-probability check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventCase {
    pub n: usize,
    pub z: usize,
    pub c: f64,
    pub offspring: u64,
}

/// n in {4, 10, 50}, Z in {0, 1, n/2, n}, c in {0.5, 1}, offspring in {1, 2, 10}.
pub fn default_event_grid() -> Vec<EventCase> {
    let mut grid = Vec::new();
    for n in [4usize, 10, 50] {
        for z in [0, 1, n / 2, n] {
            for c in [0.5, 1.0] {
                for offspring in [1u64, 2, 10] {
                    grid.push(EventCase { n, z, c, offspring });
                }
            }
        }
    }
    grid
}

/// Closed form against Monte Carlo for one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventCheck {
    pub exact: f64,
    pub estimate: f64,
    /// Binomial standard error at the exact probability.
    pub std_error: f64,
    pub ok: bool,
}

impl EventCheck {
    fn new(exact: f64, hits: u64, trials: u64) -> Self {
        let estimate = hits as f64 / trials as f64;
        let std_error = (exact * (1.0 - exact) / trials as f64).sqrt();
        let ok = if std_error == 0.0 {
            estimate == exact
        } else {
            (estimate - exact).abs() <= 4.0 * std_error
        };
        Self {
            exact,
            estimate,
            std_error,
            ok,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRow {
    pub case: EventCase,
    /// Every offspring flips at least one one-bit.
    pub a_bar: EventCheck,
    /// No offspring flips a zero-bit.
    pub b_bar: EventCheck,
    /// `-ln Pr[B̄] · n / (offspring · Z)`, for `Z >= 1`.
    pub b_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventReport {
    pub trials: u64,
    pub rows: Vec<EventRow>,
    /// Smallest and largest fitted exponent; `Pr[B̄]` lies between
    /// `exp(-max · λZ/n)` and `exp(-min · λZ/n)` on the whole grid.
    pub exponent_range: Option<(f64, f64)>,
    /// `Pr[B̄]` strictly decreases in the offspring count for every
    /// `(n, Z >= 1, c)` in the grid.
    pub b_bar_monotone: bool,
}

impl EventReport {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .map(|r| (!r.a_bar.ok) as usize + (!r.b_bar.ok) as usize)
            .sum()
    }
}

/// Compares the closed forms for `Pr[Ā]` and `Pr[B̄]` with a simulation of
/// the mutation operator, within 4 binomial standard errors.
pub fn verify_event_probabilities(
    grid: &[EventCase],
    trials: u64,
    rng: &RngStream,
) -> Result<EventReport> {
    if trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let rows: Vec<EventRow> = grid
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let exact_a = prob_a_bar(case.n, case.z, case.c, case.offspring)?;
            let exact_b = prob_b_bar(case.n, case.z, case.c, case.offspring)?;
            let sampler = BitFlipSampler::new(case.n, case.c)?;
            let case_rng = rng.derive_indexed(StreamRole::Trial, i as u64);
            let x =
                SearchPoint::with_zeromax(case.n, case.z, &mut case_rng.derive(StreamRole::Init))?;
            let counts: Vec<(u64, u64)> = batch_sizes(trials)
                .par_iter()
                .enumerate()
                .map(|(b, &count)| {
                    let mut r = case_rng.derive_indexed(StreamRole::Mutation, b as u64);
                    let mut flips = Vec::new();
                    let (mut a_hits, mut b_hits) = (0u64, 0u64);
                    for _ in 0..count {
                        let mut all_touch_ones = true;
                        let mut none_touch_zeros = true;
                        for _ in 0..case.offspring {
                            sampler.sample_into(&mut r, &mut flips);
                            all_touch_ones &= flips.iter().any(|&p| x.get(p));
                            none_touch_zeros &= flips.iter().all(|&p| x.get(p));
                        }
                        a_hits += all_touch_ones as u64;
                        b_hits += none_touch_zeros as u64;
                    }
                    (a_hits, b_hits)
                })
                .collect();
            let a_hits = counts.iter().map(|c| c.0).sum();
            let b_hits = counts.iter().map(|c| c.1).sum();
            let b_exponent = (case.z > 0)
                .then(|| -exact_b.ln() * case.n as f64 / (case.offspring as f64 * case.z as f64));
            Ok(EventRow {
                case: *case,
                a_bar: EventCheck::new(exact_a, a_hits, trials),
                b_bar: EventCheck::new(exact_b, b_hits, trials),
                b_exponent,
            })
        })
        .collect::<Result<_>>()?;

    let exponents: Vec<f64> = rows.iter().filter_map(|r| r.b_exponent).collect();
    let exponent_range = (!exponents.is_empty()).then(|| {
        (
            exponents.iter().copied().fold(f64::INFINITY, f64::min),
            exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    });

    let mut b_bar_monotone = true;
    for r in &rows {
        if r.case.z == 0 {
            continue;
        }
        for q in &rows {
            let same_point = q.case.n == r.case.n && q.case.z == r.case.z && q.case.c == r.case.c;
            if same_point && q.case.offspring > r.case.offspring && q.b_bar.exact >= r.b_bar.exact {
                b_bar_monotone = false;
            }
        }
    }

    Ok(EventReport {
        trials,
        rows,
        exponent_range,
        b_bar_monotone,
    })
}

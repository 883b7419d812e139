//! Invariant suites: monotonicity fuzzing, sandwich bounds and exact
//! replay of a run's λ updates and evaluation counter.

use std::cmp::Ordering;

use rand::Rng;
use serde::Serialize;

use crate::bitstring::SearchPoint;
use crate::ea::{
    round_offspring, run_on_instance, update_lambda, AlgorithmParams, InitPolicy, RunOptions,
    TrajectoryMode,
};
use crate::error::{invalid, Result};
use crate::fitness::{dominated_pair, FitnessInstance, FunctionSpec};
use crate::potentials::{Family, PotentialSpec};
use crate::rng::{RngStream, StreamRole};

/// Outcome of one suite: how many checks ran and the first few failures.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub name: String,
    pub checks: u64,
    pub violations: u64,
    pub examples: Vec<String>,
}

impl AuditReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            if self.examples.len() < 5 {
                self.examples.push(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checks > 0
    }
}

/// Checks `pairs` random dominated pairs under each of `generations`
/// successive instances of `spec` (advanced along random parents), through
/// both the full comparison and the mutant fast path.
pub fn monotonicity_fuzz(
    spec: &FunctionSpec,
    n: usize,
    pairs: u64,
    generations: u64,
    rng: &RngStream,
) -> Result<AuditReport> {
    let mut report = AuditReport::new(format!("monotonicity/{}", spec.label()));
    let mut env = rng.derive(StreamRole::Environment);
    let mut r = rng.derive(StreamRole::Trial);
    let mut instance = FitnessInstance::new(spec, n, &mut env)?;
    for t in 0..generations {
        let parent = SearchPoint::new_random(n, &mut r)?;
        instance = instance.advance(t, &parent, &mut env)?;
        for _ in 0..pairs {
            let (hi, lo) = dominated_pair(n, &mut r);
            let full = instance.compare(&hi, &lo)?;
            let reverse = instance.compare(&lo, &hi)?;
            let lifted: Vec<usize> = (0..n).filter(|&i| hi.get(i) && !lo.get(i)).collect();
            let fast = instance.compare_mutants(&lo, &lifted, &[]);
            report.check(
                full == Ordering::Greater && reverse == Ordering::Less && fast == Ordering::Greater,
                || format!("t={t}: {hi} vs {lo} gave {full:?}/{reverse:?}/{fast:?}"),
            );
        }
    }
    Ok(report)
}

/// Draws `states` random `(x, λ)` with λ log-uniform on `[1, F²·λmax]` and
/// checks `g - lower <= ZeroMax <= g + upper`.
pub fn sandwich_check(
    family: Family,
    f: f64,
    s: f64,
    n: usize,
    states: u64,
    rng: &RngStream,
) -> Result<AuditReport> {
    let pot = PotentialSpec::new(family, f, s, n)?;
    let (lower, upper) = pot.sandwich_bounds()?;
    let mut report = AuditReport::new(format!("sandwich/{}", family.name()));
    let mut r = rng.derive(StreamRole::Trial);
    let log_top = (pot.lambda_max() * f * f).ln();
    for _ in 0..states {
        let z = r.random_range(0..=n);
        let x = SearchPoint::with_zeromax(n, z, &mut r)?;
        let lambda = (r.random::<f64>() * log_top).exp().max(1.0);
        let g = pot.g(&x, lambda)?;
        let zm = z as f64;
        report.check(g - lower <= zm && zm <= g + upper, || {
            format!("Z={z} lambda={lambda}: g={g}, gaps ({lower}, {upper})")
        });
    }
    Ok(report)
}

/// Replays one full run: every step's λ update must equal
/// [`update_lambda`] bit for bit, its offspring count must equal
/// `⌊λ⌉`, ZeroMax values must chain, and the evaluation counter must equal
/// the sum of offspring counts.
pub fn replay_run(
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    seed: &RngStream,
    init: &InitPolicy,
) -> Result<(AuditReport, AuditReport)> {
    let options = RunOptions {
        trajectory: TrajectoryMode::Full,
        deadline: None,
    };
    let instance = FitnessInstance::new(
        spec,
        params.n,
        &mut seed.derive_indexed(StreamRole::Environment, 0),
    )?;
    let result = run_on_instance(params, instance, seed, init, &options, |_| {})?;
    if result.trajectory.len() as u64 != result.generations {
        return Err(invalid("trajectory", "full trajectory is missing steps"));
    }
    let mut lambda_report = AuditReport::new(format!("lambda-update/{}", spec.label()));
    let mut eval_report = AuditReport::new(format!("evaluations/{}", spec.label()));
    let mut evaluations = 0u64;
    let mut successes = 0u64;
    let mut lambda = params.lambda_init;
    let mut prev_z: Option<usize> = None;
    for rec in &result.trajectory {
        let want = update_lambda(rec.lambda_before, rec.success, params.f, params.s);
        lambda_report.check(
            rec.lambda_before.to_bits() == lambda.to_bits()
                && rec.lambda_after.to_bits() == want.to_bits(),
            || {
                format!(
                    "t={}: lambda {} -> {} (success={}), expected {lambda} -> {want}",
                    rec.t, rec.lambda_before, rec.lambda_after, rec.success
                )
            },
        );
        let k = round_offspring(rec.lambda_before)?;
        eval_report.check(rec.offspring_count == k, || {
            format!(
                "t={}: {} offspring for lambda {}",
                rec.t, rec.offspring_count, rec.lambda_before
            )
        });
        if let Some(z) = prev_z {
            eval_report.check(z == rec.zeromax_before, || {
                format!(
                    "t={}: ZeroMax {} does not continue {z}",
                    rec.t, rec.zeromax_before
                )
            });
        }
        prev_z = Some(rec.zeromax_after);
        lambda = rec.lambda_after;
        evaluations += k;
        successes += rec.success as u64;
    }
    eval_report.check(evaluations == result.evaluations, || {
        format!(
            "recomputed {evaluations} evaluations, run reported {}",
            result.evaluations
        )
    });
    eval_report.check(successes == result.success_generations, || {
        format!(
            "recomputed {successes} successes, run reported {}",
            result.success_generations
        )
    });
    eval_report.check(result.evaluations >= result.generations, || {
        "fewer evaluations than generations".to_string()
    });
    Ok((lambda_report, eval_report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let rng = RngStream::new(11, 0);
        for spec in [FunctionSpec::OneMax, FunctionSpec::DynamicBinVal] {
            assert!(monotonicity_fuzz(&spec, 40, 50, 3, &rng).unwrap().passed());
        }
        assert!(sandwich_check(Family::g2(), 1.5, 1.0, 30, 500, &rng)
            .unwrap()
            .passed());
        assert!(sandwich_check(Family::g4(), 1.5, 1.0, 30, 10, &rng).is_err());
        let params = AlgorithmParams::new(30, 1.0, 0.5, 1.5).unwrap();
        let (l, e) = replay_run(
            &params,
            &FunctionSpec::OneMax,
            &rng,
            &InitPolicy::UniformRandom,
        )
        .unwrap();
        assert!(l.passed() && e.passed(), "{l:?} {e:?}");
    }
}

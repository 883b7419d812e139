//! The self-adjusting (1,λ)-EA with the (1:s+1)-success rule.
//!
//! One generation: sample `⌊λ⌉` offspring by standard bit mutation, pick a
//! uniformly random best offspring under `f^t`, replace the parent with it
//! unconditionally, then shrink λ by `F` on a strict improvement or grow it
//! by `F^{1/s}` otherwise.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::{BitFlipSampler, SearchPoint};
use crate::error::{invalid, Result};
use crate::fitness::{FitnessInstance, FunctionSpec};
use crate::rng::{RngStream, StreamRole};

/// Generation cap used when none is given: `500·n`.
pub const DEFAULT_CAP_MULTIPLIER: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub n: usize,
    /// Mutation rate is `c/n`.
    pub c: f64,
    /// Success ratio of the (1:s+1)-rule.
    pub s: f64,
    /// Update strength.
    #[serde(rename = "F")]
    pub f: f64,
    pub lambda_init: f64,
    pub generation_cap: u64,
    pub evaluation_cap: Option<u64>,
}

impl AlgorithmParams {
    /// Parameters with `λ^init = 1` and a `500·n` generation cap.
    pub fn new(n: usize, c: f64, s: f64, f: f64) -> Result<Self> {
        let params = Self {
            n,
            c,
            s,
            f,
            lambda_init: 1.0,
            generation_cap: (DEFAULT_CAP_MULTIPLIER * n as f64).ceil() as u64,
            evaluation_cap: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_lambda_init(mut self, lambda_init: f64) -> Result<Self> {
        self.lambda_init = lambda_init;
        self.validate()?;
        Ok(self)
    }

    pub fn with_generation_cap(mut self, cap: u64) -> Self {
        self.generation_cap = cap;
        self
    }

    pub fn with_evaluation_cap(mut self, cap: Option<u64>) -> Self {
        self.evaluation_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        if !(self.c > 0.0 && self.c <= self.n as f64) {
            return Err(invalid("c", format!("need 0 < c <= n, got c = {}", self.c)));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(invalid("s", format!("need s > 0, got {}", self.s)));
        }
        if !(self.f > 1.0) || !self.f.is_finite() {
            return Err(invalid("F", format!("need F > 1, got {}", self.f)));
        }
        if !(self.lambda_init >= 1.0) || !self.lambda_init.is_finite() {
            return Err(invalid(
                "lambda_init",
                format!("need lambda_init >= 1, got {}", self.lambda_init),
            ));
        }
        if self.evaluation_cap == Some(0) {
            return Err(invalid("evaluation_cap", "must be positive when set"));
        }
        Ok(())
    }

    /// `F^{1/s}`, the growth factor applied after an unsuccessful generation.
    pub fn growth_factor(&self) -> f64 {
        self.f.powf(1.0 / self.s)
    }
}

/// Number of offspring for a (possibly fractional) λ: the nearest integer,
/// with halves rounded up.
pub fn round_offspring(lambda: f64) -> Result<u64> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("need lambda >= 1, got {lambda}")));
    }
    Ok(lambda.round() as u64)
}

/// The (1:s+1)-success rule.
pub fn update_lambda(lambda: f64, success: bool, f: f64, s: f64) -> f64 {
    if success {
        (lambda / f).max(1.0)
    } else {
        lambda * f.powf(1.0 / s)
    }
}

/// How the parent of generation 0 is chosen.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    #[default]
    UniformRandom,
    /// All-ones with this many zero-bits at random positions.
    FixedZeromax(usize),
    Explicit(SearchPoint),
}

impl InitPolicy {
    pub fn label(&self) -> String {
        match self {
            InitPolicy::UniformRandom => "uniform".into(),
            InitPolicy::FixedZeromax(k) => format!("zeromax{k}"),
            InitPolicy::Explicit(_) => "explicit".into(),
        }
    }

    pub fn initial_point(&self, n: usize, rng: &mut RngStream) -> Result<SearchPoint> {
        match self {
            InitPolicy::UniformRandom => SearchPoint::new_random(n, rng),
            InitPolicy::FixedZeromax(k) => SearchPoint::with_zeromax(n, *k, rng),
            InitPolicy::Explicit(x) => {
                x.check_len(n)?;
                Ok(x.clone())
            }
        }
    }
}

impl std::str::FromStr for InitPolicy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" || s == "random" {
            return Ok(InitPolicy::UniformRandom);
        }
        if let Some(k) = s.strip_prefix("zeromax") {
            let k = k.trim_start_matches([':', '=']);
            return k
                .parse()
                .map(InitPolicy::FixedZeromax)
                .map_err(|_| invalid("init", format!("bad zeromax count in `{s}`")));
        }
        if let Some(bits) = s.strip_prefix("explicit:") {
            return Ok(InitPolicy::Explicit(bits.parse()?));
        }
        Err(invalid("init", format!("unknown init policy `{s}`")))
    }
}

/// Evolving state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmState {
    pub x: SearchPoint,
    pub zeromax: usize,
    pub lambda: f64,
    pub t: u64,
    pub evaluations: u64,
    /// Smallest ZeroMax value seen so far.
    pub best_zeromax: usize,
    pub last_success: bool,
    pub success_generations: u64,
}

impl AlgorithmState {
    pub fn new(x: SearchPoint, lambda: f64) -> Result<Self> {
        round_offspring(lambda)?;
        let z = x.zeromax();
        Ok(Self {
            x,
            zeromax: z,
            lambda,
            t: 0,
            evaluations: 0,
            best_zeromax: z,
            last_success: false,
            success_generations: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub zeromax_before: usize,
    pub zeromax_after: usize,
    pub lambda_before: f64,
    pub lambda_after: f64,
    pub offspring_count: u64,
    pub success: bool,
}

/// Reusable per-run machinery: the mutation sampler and flip buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    sampler: BitFlipSampler,
    f: f64,
    growth: f64,
    best: Vec<usize>,
    candidate: Vec<usize>,
}

impl Stepper {
    pub fn new(params: &AlgorithmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            sampler: BitFlipSampler::new(params.n, params.c)?,
            f: params.f,
            growth: params.growth_factor(),
            best: Vec::new(),
            candidate: Vec::new(),
        })
    }

    /// Flip positions of the child selected in the last step.
    pub fn selected_flips(&self) -> &[usize] {
        &self.best
    }

    /// Runs one generation under `instance` (already advanced to `f^t`).
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &mut AlgorithmState,
        instance: &FitnessInstance,
        rng: &mut R,
    ) -> Result<StepRecord> {
        if state.zeromax == 0 {
            return Err(invalid("state", "step called on the optimum"));
        }
        state.x.check_len(self.sampler.n())?;
        let parent = &state.x;
        let offspring = round_offspring(state.lambda)?;

        self.sampler.sample_into(rng, &mut self.best);
        let mut ties = 1u64;
        for _ in 1..offspring {
            self.sampler.sample_into(rng, &mut self.candidate);
            match instance.compare_mutants(parent, &self.candidate, &self.best) {
                Ordering::Greater => {
                    std::mem::swap(&mut self.best, &mut self.candidate);
                    ties = 1;
                }
                Ordering::Equal => {
                    // reservoir sampling keeps a uniform choice among the argmax set
                    ties += 1;
                    if rng.random_range(0..ties) == 0 {
                        std::mem::swap(&mut self.best, &mut self.candidate);
                    }
                }
                Ordering::Less => {}
            }
        }
        let success = instance.compare_mutants(parent, &self.best, &[]) == Ordering::Greater;

        let ones_flipped = self.best.iter().filter(|&&i| parent.get(i)).count();
        let zeros_flipped = self.best.len() - ones_flipped;
        let zeromax_before = state.zeromax;
        let zeromax_after = zeromax_before + ones_flipped - zeros_flipped;
        state.x.apply_flips(&self.best);

        let lambda_before = state.lambda;
        let lambda_after = if success {
            (lambda_before / self.f).max(1.0)
        } else {
            lambda_before * self.growth
        };

        let record = StepRecord {
            t: state.t,
            zeromax_before,
            zeromax_after,
            lambda_before,
            lambda_after,
            offspring_count: offspring,
            success,
        };
        state.zeromax = zeromax_after;
        state.lambda = lambda_after;
        state.t += 1;
        state.evaluations += offspring;
        state.best_zeromax = state.best_zeromax.min(zeromax_after);
        state.last_success = success;
        state.success_generations += success as u64;
        Ok(record)
    }
}

/// One generation as a free function; allocates a fresh [`Stepper`].
pub fn step(
    state: &mut AlgorithmState,
    instance: &FitnessInstance,
    params: &AlgorithmParams,
    rng: &mut RngStream,
) -> Result<StepRecord> {
    Stepper::new(params)?.step(state, instance, rng)
}

/// Which step records a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMode {
    Off,
    /// Every `⌈n/100⌉`-th step plus every successful step.
    #[default]
    Sampled,
    Full,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub trajectory: TrajectoryMode,
    /// Stop early (as [`StopReason::Deadline`]) once this instant passes.
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Optimum,
    GenerationCap,
    EvaluationCap,
    Deadline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub generations: u64,
    pub evaluations: u64,
    pub hit_cap: bool,
    pub stop: StopReason,
    pub final_zeromax: usize,
    pub best_zeromax: usize,
    pub final_lambda: f64,
    pub max_lambda: f64,
    pub success_generations: u64,
    pub trajectory: Vec<StepRecord>,
}

/// Runs the EA on a fresh instance of `spec`.
pub fn run(
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    seed: &RngStream,
    init: &InitPolicy,
) -> Result<RunResult> {
    run_with_options(params, spec, seed, init, &RunOptions::default())
}

pub fn run_with_options(
    params: &AlgorithmParams,
    spec: &FunctionSpec,
    seed: &RngStream,
    init: &InitPolicy,
    options: &RunOptions,
) -> Result<RunResult> {
    let mut env = seed.derive_indexed(StreamRole::Environment, 0);
    let instance = FitnessInstance::new(spec, params.n, &mut env)?;
    run_on_instance(params, instance, seed, init, options, |_| {})
}

/// Runs on a prepared instance (e.g. one built around a custom adversary),
/// calling `observer` after every generation.
pub fn run_on_instance(
    params: &AlgorithmParams,
    mut instance: FitnessInstance,
    seed: &RngStream,
    init: &InitPolicy,
    options: &RunOptions,
    mut observer: impl FnMut(&StepRecord),
) -> Result<RunResult> {
    params.validate()?;
    if instance.n() != params.n {
        return Err(crate::Error::DimensionMismatch {
            expected: params.n,
            actual: instance.n(),
        });
    }
    let mut init_rng = seed.derive(StreamRole::Init);
    // index 0 is reserved for building the initial instance
    let mut env = seed.derive_indexed(StreamRole::Environment, 1);
    let mut rng = seed.derive(StreamRole::Mutation);

    let x0 = init.initial_point(params.n, &mut init_rng)?;
    let mut state = AlgorithmState::new(x0, params.lambda_init)?;
    let mut stepper = Stepper::new(params)?;
    let sample_every = params.n.div_ceil(100).max(1) as u64;
    let mut trajectory = Vec::new();
    let mut max_lambda = state.lambda;

    let stop = loop {
        if state.zeromax == 0 {
            break StopReason::Optimum;
        }
        if state.t >= params.generation_cap {
            break StopReason::GenerationCap;
        }
        if params
            .evaluation_cap
            .is_some_and(|cap| state.evaluations >= cap)
        {
            break StopReason::EvaluationCap;
        }
        if state.t % 1024 == 0 && options.deadline.is_some_and(|d| Instant::now() >= d) {
            break StopReason::Deadline;
        }
        instance = instance.advance(state.t, &state.x, &mut env)?;
        let record = stepper.step(&mut state, &instance, &mut rng)?;
        max_lambda = max_lambda.max(record.lambda_after);
        observer(&record);
        let keep = match options.trajectory {
            TrajectoryMode::Off => false,
            TrajectoryMode::Full => true,
            TrajectoryMode::Sampled => record.success || record.t % sample_every == 0,
        };
        if keep {
            trajectory.push(record);
        }
    };

    Ok(RunResult {
        generations: state.t,
        evaluations: state.evaluations,
        hit_cap: matches!(stop, StopReason::GenerationCap | StopReason::EvaluationCap),
        stop,
        final_zeromax: state.zeromax,
        best_zeromax: state.best_zeromax,
        final_lambda: state.lambda,
        max_lambda,
        success_generations: state.success_generations,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::FunctionSpec;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_offspring(1.0).unwrap(), 1);
        assert_eq!(round_offspring(2.5).unwrap(), 3);
        assert_eq!(round_offspring(3.4).unwrap(), 3);
        assert_eq!(round_offspring(1.49).unwrap(), 1);
        assert!(round_offspring(0.99).is_err());
        assert!(round_offspring(f64::NAN).is_err());
    }

    #[test]
    fn update_examples() {
        assert!((update_lambda(2.0, true, 1.5, 1.0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(update_lambda(1.0, true, 2.0, 1.0), 1.0);
        assert_eq!(update_lambda(1.0, false, 1.5, 1.0), 1.5);
        assert!((update_lambda(2.0, false, 4.0, 2.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(AlgorithmParams::new(10, 1.0, 1.0, 1.0).is_err());
        assert!(AlgorithmParams::new(10, 0.0, 1.0, 1.5).is_err());
        assert!(AlgorithmParams::new(10, 11.0, 1.0, 1.5).is_err());
        assert!(AlgorithmParams::new(10, 1.0, 0.0, 1.5).is_err());
        assert!(AlgorithmParams::new(10, 1.0, 1.0, 1.5)
            .unwrap()
            .with_lambda_init(0.5)
            .is_err());
        assert_eq!(
            AlgorithmParams::new(10, 1.0, 1.0, 1.5)
                .unwrap()
                .generation_cap,
            5000
        );
    }

    #[test]
    fn init_policy_parsing() {
        assert_eq!(
            "uniform".parse::<InitPolicy>().unwrap(),
            InitPolicy::UniformRandom
        );
        assert_eq!(
            "zeromax10".parse::<InitPolicy>().unwrap(),
            InitPolicy::FixedZeromax(10)
        );
        assert_eq!(
            "zeromax:3".parse::<InitPolicy>().unwrap(),
            InitPolicy::FixedZeromax(3)
        );
        assert!("explicit:1021".parse::<InitPolicy>().is_err());
    }

    #[test]
    fn tiny_rate_never_succeeds() {
        let params = AlgorithmParams::new(20, 1e-9, 0.7, 1.5).unwrap();
        let f = FitnessInstance::new_static(FunctionSpec::OneMax, 20).unwrap();
        let mut rng = RngStream::new(3, 3);
        let mut stepper = Stepper::new(&params).unwrap();
        let x0 = SearchPoint::with_zeromax(20, 7, &mut rng).unwrap();
        let mut state = AlgorithmState::new(x0.clone(), 1.0).unwrap();
        for _ in 0..1000 {
            let lambda = state.lambda;
            let rec = stepper.step(&mut state, &f, &mut rng).unwrap();
            assert!(!rec.success);
            assert_eq!(rec.lambda_after, lambda * params.growth_factor());
            assert_eq!(state.x, x0);
            // keep λ small so the test stays quick
            state.lambda = 1.0;
        }
    }

    #[test]
    fn unique_improving_child_is_always_selected() {
        // parent all-zeros; with c = n every bit flips, giving the all-ones child
        // which is the unique argmax.
        let params = AlgorithmParams::new(6, 6.0, 1.0, 1.5).unwrap();
        let f = FitnessInstance::new_static(FunctionSpec::OneMax, 6).unwrap();
        let mut rng = RngStream::new(1, 1);
        let mut stepper = Stepper::new(&params).unwrap();
        let mut state = AlgorithmState::new(SearchPoint::zeros(6).unwrap(), 2.0).unwrap();
        let rec = stepper.step(&mut state, &f, &mut rng).unwrap();
        assert!(rec.success);
        assert_eq!(state.zeromax, 0);
        assert_eq!(rec.lambda_after, 2.0 / 1.5);
    }

    #[test]
    fn step_on_optimum_is_rejected() {
        let params = AlgorithmParams::new(4, 1.0, 1.0, 1.5).unwrap();
        let f = FitnessInstance::new_static(FunctionSpec::OneMax, 4).unwrap();
        let mut state = AlgorithmState::new(SearchPoint::ones(4).unwrap(), 1.0).unwrap();
        assert!(step(&mut state, &f, &params, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn zero_generation_cap() {
        let params = AlgorithmParams::new(30, 1.0, 1.0, 1.5)
            .unwrap()
            .with_generation_cap(0);
        let seed = RngStream::new(1, 2);
        let r = run(
            &params,
            &FunctionSpec::OneMax,
            &seed,
            &InitPolicy::UniformRandom,
        )
        .unwrap();
        assert_eq!(r.generations, 0);
        assert!(r.hit_cap);
        let r = run(
            &params,
            &FunctionSpec::OneMax,
            &seed,
            &InitPolicy::FixedZeromax(0),
        )
        .unwrap();
        assert_eq!(r.generations, 0);
        assert!(!r.hit_cap);
        assert_eq!(r.stop, StopReason::Optimum);
    }

    #[test]
    fn evaluation_cap_stops_run() {
        let params = AlgorithmParams::new(200, 1.0, 20.0, 1.5)
            .unwrap()
            .with_evaluation_cap(Some(500));
        let r = run(
            &params,
            &FunctionSpec::OneMax,
            &RngStream::new(4, 4),
            &InitPolicy::UniformRandom,
        )
        .unwrap();
        assert!(r.hit_cap);
        assert_eq!(r.stop, StopReason::EvaluationCap);
        assert!(r.evaluations >= 500);
    }

    #[test]
    fn sampled_trajectory_keeps_successes() {
        let params = AlgorithmParams::new(300, 1.0, 0.5, 1.5).unwrap();
        let opts = RunOptions {
            trajectory: TrajectoryMode::Sampled,
            deadline: None,
        };
        let r = run_with_options(
            &params,
            &FunctionSpec::OneMax,
            &RngStream::new(8, 8),
            &InitPolicy::UniformRandom,
            &opts,
        )
        .unwrap();
        let successes = r.trajectory.iter().filter(|s| s.success).count() as u64;
        assert_eq!(successes, r.success_generations);
        assert!(r.trajectory.iter().all(|s| s.success || s.t % 3 == 0));
    }
}

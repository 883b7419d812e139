//! Self-adjusting (1,λ)-EA with the (1:s+1)-success rule on static and
//! dynamic monotone pseudo-Boolean functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`rng`], [`bitstring`]: seeded streams, packed genotypes, standard bit mutation.
//! - [`fitness`]: monotone benchmarks behind a comparison oracle.
//! - [`ea`]: the algorithm itself (step, run loop, λ update).
//! - [`potentials`]: the potential functions `g = ZeroMax + h` and exact event probabilities.
//! - [`drift`]: Monte-Carlo drift, success-probability and λ* estimation.
//! - [`harness`]: seeded parameter sweeps with CSV output.
//! - [`audit`]: invariant suites (monotonicity, sandwich bounds, run replay).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod bitstring;
pub mod drift;
pub mod ea;
pub mod error;
pub mod fitness;
pub mod harness;
pub mod potentials;
pub mod rng;

pub use bitstring::{mutate, zeromax, BitFlipSampler, SearchPoint};
pub use drift::{
    estimate_drift, estimate_success_prob, find_lambda_star, scan_drift_region,
    verify_event_probabilities, DriftEstimate, DriftScanReport, DriftTriple,
};
pub use ea::{
    round_offspring, run, update_lambda, AlgorithmParams, AlgorithmState, InitPolicy, RunResult,
    StepRecord, Stepper,
};
pub use error::{Error, Result};
pub use fitness::{make_instance, Adversary, FitnessInstance, FunctionSpec, MonotoneOrder};
pub use harness::{run_sweep, CellSummary, RunRecord, SweepSpec};
pub use potentials::{Family, PotentialSpec};
pub use rng::{RngStream, StreamRole};

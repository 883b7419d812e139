//! Strictly monotone benchmark functions behind a comparison oracle.
//!
//! A [`FitnessInstance`] is the function `f^t` of one generation. Static
//! kinds never change; `DynamicBinVal` draws a fresh permutation in
//! [`FitnessInstance::advance`]; an adversarial hook may pick any monotone
//! order based on the current parent, and its choice is spot-checked for
//! monotonicity before use.
//!
//! Comparison never materialises large integers: BinaryValue-style orders
//! compare bits lexicographically in descending weight order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitstring::SearchPoint;
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// Default number of dominated pairs checked per generation for hooks.
pub const DEFAULT_SPOT_CHECKS: usize = 32;

/// Which benchmark to optimise, with kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunctionSpec", into = "RawFunctionSpec")]
pub enum FunctionSpec {
    OneMax,
    Binary,
    BinaryValue,
    DynamicBinVal,
    HotTopic {
        levels: usize,
        alpha: f64,
        beta: f64,
        epsilon: f64,
    },
    AdversarialHook {
        strategy: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum FunctionKind {
    #[serde(rename = "onemax", alias = "one_max")]
    OneMax,
    #[serde(rename = "binary")]
    Binary,
    #[serde(rename = "binval", alias = "binary_value")]
    BinaryValue,
    #[serde(rename = "dynbinval", alias = "dynamic_bin_val")]
    DynamicBinVal,
    #[serde(rename = "hottopic", alias = "hot_topic")]
    HotTopic,
    #[serde(rename = "hook", alias = "adversarial_hook")]
    AdversarialHook,
}

/// Flat on-disk form: `kind` plus the parameters that kind needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunctionSpec {
    kind: FunctionKind,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<String>,
}

impl TryFrom<RawFunctionSpec> for FunctionSpec {
    type Error = String;

    fn try_from(raw: RawFunctionSpec) -> std::result::Result<Self, String> {
        let hot_topic_fields = raw.levels.is_some()
            || raw.alpha.is_some()
            || raw.beta.is_some()
            || raw.epsilon.is_some();
        let spec = match raw.kind {
            FunctionKind::HotTopic => {
                let need = |v: Option<f64>, key: &str| {
                    v.ok_or_else(|| format!("hottopic requires key `{key}`"))
                };
                if raw.strategy.is_some() {
                    return Err("key `strategy` is not valid for hottopic".into());
                }
                FunctionSpec::HotTopic {
                    levels: raw.levels.ok_or("hottopic requires key `L`")?,
                    alpha: need(raw.alpha, "alpha")?,
                    beta: need(raw.beta, "beta")?,
                    epsilon: need(raw.epsilon, "epsilon")?,
                }
            }
            FunctionKind::AdversarialHook => {
                if hot_topic_fields {
                    return Err("HotTopic keys are not valid for hook".into());
                }
                FunctionSpec::AdversarialHook {
                    strategy: raw.strategy.ok_or("hook requires key `strategy`")?,
                }
            }
            kind => {
                if hot_topic_fields || raw.strategy.is_some() {
                    return Err(format!("{kind:?} takes no parameters"));
                }
                match kind {
                    FunctionKind::OneMax => FunctionSpec::OneMax,
                    FunctionKind::Binary => FunctionSpec::Binary,
                    FunctionKind::BinaryValue => FunctionSpec::BinaryValue,
                    _ => FunctionSpec::DynamicBinVal,
                }
            }
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<FunctionSpec> for RawFunctionSpec {
    fn from(spec: FunctionSpec) -> Self {
        let mut raw = RawFunctionSpec {
            kind: FunctionKind::OneMax,
            levels: None,
            alpha: None,
            beta: None,
            epsilon: None,
            strategy: None,
        };
        raw.kind = match spec {
            FunctionSpec::OneMax => FunctionKind::OneMax,
            FunctionSpec::Binary => FunctionKind::Binary,
            FunctionSpec::BinaryValue => FunctionKind::BinaryValue,
            FunctionSpec::DynamicBinVal => FunctionKind::DynamicBinVal,
            FunctionSpec::HotTopic {
                levels,
                alpha,
                beta,
                epsilon,
            } => {
                raw.levels = Some(levels);
                raw.alpha = Some(alpha);
                raw.beta = Some(beta);
                raw.epsilon = Some(epsilon);
                FunctionKind::HotTopic
            }
            FunctionSpec::AdversarialHook { strategy } => {
                raw.strategy = Some(strategy);
                FunctionKind::AdversarialHook
            }
        };
        raw
    }
}

impl FunctionSpec {
    /// HotTopic with the parameters used in the published simulations.
    pub fn hot_topic_default() -> Self {
        FunctionSpec::HotTopic {
            levels: 100,
            alpha: 0.25,
            beta: 0.05,
            epsilon: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::HotTopic {
                levels,
                alpha,
                beta,
                epsilon,
            } => {
                if *levels == 0 {
                    return Err(invalid("L", "HotTopic needs at least one level"));
                }
                if !(*beta > 0.0) {
                    return Err(invalid(
                        "beta",
                        format!("HotTopic requires 0 < beta, got {beta}"),
                    ));
                }
                if beta > alpha {
                    return Err(invalid(
                        "beta",
                        format!(
                            "HotTopic requires beta <= alpha, got beta = {beta} > alpha = {alpha}"
                        ),
                    ));
                }
                if !(*alpha < 1.0) {
                    return Err(invalid(
                        "alpha",
                        format!("HotTopic requires alpha < 1, got {alpha}"),
                    ));
                }
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(invalid(
                        "epsilon",
                        format!("HotTopic requires 0 < epsilon < 1, got {epsilon}"),
                    ));
                }
                Ok(())
            }
            FunctionSpec::AdversarialHook { strategy } => builtin_adversary(strategy).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(
            self,
            FunctionSpec::DynamicBinVal | FunctionSpec::AdversarialHook { .. }
        )
    }

    /// True if the order is invariant under permutations of bit positions.
    pub fn is_symmetric(&self) -> bool {
        matches!(self, FunctionSpec::OneMax | FunctionSpec::DynamicBinVal)
    }

    /// Short comma-free name used in CSV rows.
    pub fn label(&self) -> String {
        match self {
            FunctionSpec::OneMax => "onemax".into(),
            FunctionSpec::Binary => "binary".into(),
            FunctionSpec::BinaryValue => "binval".into(),
            FunctionSpec::DynamicBinVal => "dynbinval".into(),
            FunctionSpec::HotTopic {
                levels,
                alpha,
                beta,
                epsilon,
            } => format!("hottopic-L{levels}-a{alpha}-b{beta}-e{epsilon}"),
            FunctionSpec::AdversarialHook { strategy } => format!("hook-{strategy}"),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Accepts the labels produced by [`FunctionSpec::label`] plus a few aliases.
/// `hottopic` alone selects the default parameters.
impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let spec = match lower.as_str() {
            "onemax" => FunctionSpec::OneMax,
            "binary" => FunctionSpec::Binary,
            "binval" | "binaryvalue" | "binary_value" => FunctionSpec::BinaryValue,
            "dynbinval" | "dynamic_binval" | "dynamicbinval" => FunctionSpec::DynamicBinVal,
            "hottopic" | "hot_topic" => FunctionSpec::hot_topic_default(),
            other => {
                if let Some(rest) = other.strip_prefix("hottopic-") {
                    parse_hot_topic_label(rest)?
                } else if let Some(name) = other
                    .strip_prefix("hook-")
                    .or_else(|| other.strip_prefix("hook:"))
                {
                    FunctionSpec::AdversarialHook {
                        strategy: name.to_string(),
                    }
                } else {
                    return Err(invalid("function", format!("unknown function `{s}`")));
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_hot_topic_label(rest: &str) -> Result<FunctionSpec> {
    let (mut levels, mut alpha, mut beta, mut epsilon) = (None, None, None, None);
    for part in rest.split('-') {
        let bad = || invalid("function", format!("bad HotTopic component `{part}`"));
        let (key, val) = part.split_at(1);
        match key {
            "l" => levels = Some(val.parse::<usize>().map_err(|_| bad())?),
            "a" => alpha = Some(val.parse::<f64>().map_err(|_| bad())?),
            "b" => beta = Some(val.parse::<f64>().map_err(|_| bad())?),
            "e" => epsilon = Some(val.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    match (levels, alpha, beta, epsilon) {
        (Some(levels), Some(alpha), Some(beta), Some(epsilon)) => Ok(FunctionSpec::HotTopic {
            levels,
            alpha,
            beta,
            epsilon,
        }),
        _ => Err(invalid("function", "HotTopic label needs L, a, b and e")),
    }
}

/// A user-supplied order on bitstrings. Implementations must be strictly
/// monotone; adversary outputs are spot-checked.
pub trait MonotoneOrder: Send + Sync + fmt::Debug {
    fn compare(&self, a: &SearchPoint, b: &SearchPoint) -> Ordering;

    fn value(&self, _x: &SearchPoint) -> Option<f64> {
        None
    }
}

/// Chooses the function of generation `t` after seeing the parent `x^t`.
pub trait Adversary: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Returns the instance to use for generation `t`. Returning another
    /// adversarial instance is rejected.
    fn choose(&self, t: u64, parent: &SearchPoint, rng: &mut RngStream) -> Result<FitnessInstance>;
}

/// Always plays static OneMax.
#[derive(Debug, Clone, Copy)]
pub struct OneMaxAdversary;

impl Adversary for OneMaxAdversary {
    fn name(&self) -> &str {
        "onemax"
    }

    fn choose(
        &self,
        _t: u64,
        parent: &SearchPoint,
        _rng: &mut RngStream,
    ) -> Result<FitnessInstance> {
        FitnessInstance::new_static(FunctionSpec::OneMax, parent.len())
    }
}

/// BinaryValue under a permutation that gives the parent's one-bits the
/// highest weights (in random order): losing any one-bit outweighs every
/// possible gain on zero-bits.
#[derive(Debug, Clone, Copy)]
pub struct OnesFirstAdversary;

impl Adversary for OnesFirstAdversary {
    fn name(&self) -> &str {
        "ones-first"
    }

    fn choose(
        &self,
        _t: u64,
        parent: &SearchPoint,
        rng: &mut RngStream,
    ) -> Result<FitnessInstance> {
        ranked_binval(parent, true, rng)
    }
}

/// BinaryValue under a permutation that gives the parent's zero-bits the
/// highest weights.
#[derive(Debug, Clone, Copy)]
pub struct ZerosFirstAdversary;

impl Adversary for ZerosFirstAdversary {
    fn name(&self) -> &str {
        "zeros-first"
    }

    fn choose(
        &self,
        _t: u64,
        parent: &SearchPoint,
        rng: &mut RngStream,
    ) -> Result<FitnessInstance> {
        ranked_binval(parent, false, rng)
    }
}

/// Negative control: plays ZeroMax, which reverses every dominated pair.
/// The first spot check of [`FitnessInstance::advance`] rejects it.
#[derive(Debug, Clone, Copy)]
pub struct ZeroMaxAdversary;

#[derive(Debug)]
struct Antitone;

impl MonotoneOrder for Antitone {
    fn compare(&self, a: &SearchPoint, b: &SearchPoint) -> Ordering {
        b.onemax().cmp(&a.onemax())
    }
}

impl Adversary for ZeroMaxAdversary {
    fn name(&self) -> &str {
        "zeromax"
    }

    fn choose(
        &self,
        _t: u64,
        parent: &SearchPoint,
        _rng: &mut RngStream,
    ) -> Result<FitnessInstance> {
        FitnessInstance::custom(parent.len(), Arc::new(Antitone))
    }
}

fn ranked_binval(
    parent: &SearchPoint,
    ones_high: bool,
    rng: &mut RngStream,
) -> Result<FitnessInstance> {
    let n = parent.len();
    let (mut high, mut low): (Vec<u32>, Vec<u32>) =
        (0..n as u32).partition(|&i| parent.get(i as usize) == ones_high);
    high.shuffle(rng);
    low.shuffle(rng);
    // perm[i] is the position carrying weight 2^i, so low weights come first.
    let mut perm = low;
    perm.extend(high);
    FitnessInstance::permuted_binval(perm)
}

/// Resolves a built-in adversary by name.
pub fn builtin_adversary(name: &str) -> Result<Arc<dyn Adversary>> {
    match name {
        "onemax" => Ok(Arc::new(OneMaxAdversary)),
        "ones-first" => Ok(Arc::new(OnesFirstAdversary)),
        "zeros-first" => Ok(Arc::new(ZerosFirstAdversary)),
        "zeromax" => Ok(Arc::new(ZeroMaxAdversary)),
        other => Err(Error::UnknownStrategy(other.to_string())),
    }
}

/// BinaryValue applied through a position permutation.
#[derive(Debug)]
struct Permutation {
    /// `perm[i]` is the position that carries weight `2^i`.
    perm: Vec<u32>,
    /// Inverse of `perm`.
    rank: Vec<u32>,
}

impl Permutation {
    fn new(perm: Vec<u32>) -> Result<Self> {
        let n = perm.len();
        let mut rank = vec![u32::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            let p = p as usize;
            if p >= n || rank[p] != u32::MAX {
                return Err(invalid("permutation", "not a permutation of 0..n"));
            }
            rank[p] = i as u32;
        }
        Ok(Self { perm, rank })
    }

    fn random(n: usize, rng: &mut RngStream) -> Self {
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(rng);
        Self::new(perm).expect("shuffle yields a permutation")
    }
}

/// Level sets of a HotTopic instance.
#[derive(Debug)]
struct HotTopicLevels {
    a_sets: Vec<Vec<u32>>,
    b_sets: Vec<Vec<u32>>,
    a_masks: Vec<Vec<u64>>,
    b_masks: Vec<Vec<u64>>,
    /// A level i is reached while fewer than this many A_i bits are zero.
    threshold: f64,
}

fn mask_of(n: usize, set: &[u32]) -> Vec<u64> {
    let mut m = vec![0u64; n.div_ceil(64)];
    for &i in set {
        m[i as usize / 64] |= 1 << (i % 64);
    }
    m
}

impl HotTopicLevels {
    fn sample(
        n: usize,
        levels: usize,
        alpha: f64,
        beta: f64,
        epsilon: f64,
        rng: &mut RngStream,
    ) -> Self {
        let a_size = (alpha * n as f64).floor() as usize;
        let b_size = ((beta * n as f64).floor() as usize).min(a_size);
        let mut a_sets = Vec::with_capacity(levels);
        let mut b_sets = Vec::with_capacity(levels);
        for _ in 0..levels {
            let a: Vec<u32> = rand::seq::index::sample(rng, n, a_size)
                .into_iter()
                .map(|i| i as u32)
                .collect();
            let b: Vec<u32> = rand::seq::index::sample(rng, a_size, b_size)
                .into_iter()
                .map(|j| a[j])
                .collect();
            a_sets.push(a);
            b_sets.push(b);
        }
        Self::from_sets(n, a_sets, b_sets, epsilon * beta * n as f64)
    }

    fn from_sets(n: usize, a_sets: Vec<Vec<u32>>, b_sets: Vec<Vec<u32>>, threshold: f64) -> Self {
        let a_masks = a_sets.iter().map(|s| mask_of(n, s)).collect();
        let b_masks = b_sets.iter().map(|s| mask_of(n, s)).collect();
        Self {
            a_sets,
            b_sets,
            a_masks,
            b_masks,
            threshold,
        }
    }

    /// (level, ones in B_{level+1}, ones outside B_{level+1}).
    fn key(&self, x: &SearchPoint) -> (usize, usize, usize) {
        let words = x.words();
        let zeros_in = |mask: &[u64]| -> usize {
            mask.iter()
                .zip(words)
                .map(|(m, w)| (m & !w).count_ones() as usize)
                .sum()
        };
        let levels = self.a_masks.len();
        let level = (1..=levels)
            .rev()
            .find(|&i| (zeros_in(&self.a_masks[i - 1]) as f64) < self.threshold)
            .unwrap_or(0);
        let ones = x.onemax();
        if level == levels {
            return (level, 0, ones);
        }
        let in_b: usize = self.b_masks[level]
            .iter()
            .zip(words)
            .map(|(m, w)| (m & w).count_ones() as usize)
            .sum();
        (level, in_b, ones - in_b)
    }
}

#[derive(Debug, Clone)]
enum Order {
    OneMax,
    Binary,
    BinaryValue,
    Permuted(Arc<Permutation>),
    HotTopic(Arc<HotTopicLevels>),
    Custom(Arc<dyn MonotoneOrder>),
}

/// The monotone function of one generation.
#[derive(Debug, Clone)]
pub struct FitnessInstance {
    spec: FunctionSpec,
    n: usize,
    order: Order,
    adversary: Option<Arc<dyn Adversary>>,
    spot_checks: usize,
}

/// Builds a fresh instance for generation 0.
pub fn make_instance(
    spec: &FunctionSpec,
    n: usize,
    rng: &mut RngStream,
) -> Result<FitnessInstance> {
    FitnessInstance::new(spec, n, rng)
}

impl FitnessInstance {
    pub fn new(spec: &FunctionSpec, n: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        spec.validate()?;
        let (order, adversary) = match spec {
            FunctionSpec::OneMax => (Order::OneMax, None),
            FunctionSpec::Binary => (Order::Binary, None),
            FunctionSpec::BinaryValue => (Order::BinaryValue, None),
            FunctionSpec::DynamicBinVal => {
                (Order::Permuted(Arc::new(Permutation::random(n, rng))), None)
            }
            FunctionSpec::HotTopic {
                levels,
                alpha,
                beta,
                epsilon,
            } => (
                Order::HotTopic(Arc::new(HotTopicLevels::sample(
                    n, *levels, *alpha, *beta, *epsilon, rng,
                ))),
                None,
            ),
            // The adversary has not seen a parent yet; `advance` replaces this.
            FunctionSpec::AdversarialHook { strategy } => {
                (Order::OneMax, Some(builtin_adversary(strategy)?))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            n,
            order,
            adversary,
            spot_checks: DEFAULT_SPOT_CHECKS,
        })
    }

    /// A static instance that needs no randomness.
    pub fn new_static(spec: FunctionSpec, n: usize) -> Result<Self> {
        let order = match spec {
            FunctionSpec::OneMax => Order::OneMax,
            FunctionSpec::Binary => Order::Binary,
            FunctionSpec::BinaryValue => Order::BinaryValue,
            _ => {
                return Err(invalid(
                    "function",
                    format!("{spec} is not a deterministic static kind"),
                ))
            }
        };
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        Ok(Self {
            spec,
            n,
            order,
            adversary: None,
            spot_checks: DEFAULT_SPOT_CHECKS,
        })
    }

    /// BinaryValue through an explicit permutation; `perm[i]` carries weight `2^i`.
    pub fn permuted_binval(perm: Vec<u32>) -> Result<Self> {
        let n = perm.len();
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        Ok(Self {
            spec: FunctionSpec::DynamicBinVal,
            n,
            order: Order::Permuted(Arc::new(Permutation::new(perm)?)),
            adversary: None,
            spot_checks: DEFAULT_SPOT_CHECKS,
        })
    }

    /// Wraps a user order. Its monotonicity is the caller's responsibility
    /// unless it is produced by an adversary.
    pub fn custom(n: usize, order: Arc<dyn MonotoneOrder>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        Ok(Self {
            spec: FunctionSpec::AdversarialHook {
                strategy: "custom".into(),
            },
            n,
            order: Order::Custom(order),
            adversary: None,
            spot_checks: DEFAULT_SPOT_CHECKS,
        })
    }

    /// An adversarial instance driven by a user strategy.
    pub fn with_adversary(n: usize, adversary: Arc<dyn Adversary>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        Ok(Self {
            spec: FunctionSpec::AdversarialHook {
                strategy: adversary.name().to_string(),
            },
            n,
            order: Order::OneMax,
            adversary: Some(adversary),
            spot_checks: DEFAULT_SPOT_CHECKS,
        })
    }

    /// Number of dominated pairs checked whenever an adversary picks an order.
    pub fn set_spot_checks(&mut self, k: usize) {
        self.spot_checks = k;
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Produces `f^t`. Must be called once per generation before offspring
    /// are compared.
    pub fn advance(
        &self,
        t: u64,
        parent: &SearchPoint,
        rng: &mut RngStream,
    ) -> Result<FitnessInstance> {
        parent.check_len(self.n)?;
        if let Some(adversary) = &self.adversary {
            let chosen = adversary.choose(t, parent, rng)?;
            if chosen.adversary.is_some() {
                return Err(Error::HookViolation {
                    generation: t,
                    detail: "adversary returned another adversarial instance".into(),
                });
            }
            if chosen.n != self.n {
                return Err(Error::HookViolation {
                    generation: t,
                    detail: format!("instance has n = {}, expected {}", chosen.n, self.n),
                });
            }
            spot_check(&chosen, parent, self.spot_checks, rng).map_err(|detail| {
                Error::HookViolation {
                    generation: t,
                    detail,
                }
            })?;
            return Ok(FitnessInstance {
                spec: self.spec.clone(),
                n: self.n,
                order: chosen.order,
                adversary: self.adversary.clone(),
                spot_checks: self.spot_checks,
            });
        }
        match &self.spec {
            FunctionSpec::DynamicBinVal => Ok(FitnessInstance {
                order: Order::Permuted(Arc::new(Permutation::random(self.n, rng))),
                ..self.clone()
            }),
            _ => Ok(self.clone()),
        }
    }

    /// Compares two full points under the current generation's order.
    pub fn compare(&self, a: &SearchPoint, b: &SearchPoint) -> Result<Ordering> {
        a.check_len(self.n)?;
        b.check_len(self.n)?;
        Ok(self.compare_unchecked(a, b))
    }

    pub(crate) fn compare_unchecked(&self, a: &SearchPoint, b: &SearchPoint) -> Ordering {
        match &self.order {
            Order::OneMax => a.onemax().cmp(&b.onemax()),
            Order::Binary => {
                let half = self.n / 2;
                let key = |x: &SearchPoint| {
                    let first = (0..half).filter(|&i| x.get(i)).count() as u64;
                    first * self.n as u64 + (x.onemax() as u64 - first)
                };
                key(a).cmp(&key(b))
            }
            Order::BinaryValue => {
                for (wa, wb) in a.words().iter().zip(b.words()).rev() {
                    let d = wa ^ wb;
                    if d != 0 {
                        let bit = 63 - d.leading_zeros();
                        return if (wa >> bit) & 1 == 1 {
                            Ordering::Greater
                        } else {
                            Ordering::Less
                        };
                    }
                }
                Ordering::Equal
            }
            Order::Permuted(p) => {
                let mut best: Option<(u32, bool)> = None;
                for (w, (wa, wb)) in a.words().iter().zip(b.words()).enumerate() {
                    let mut d = wa ^ wb;
                    while d != 0 {
                        let bit = d.trailing_zeros();
                        d &= d - 1;
                        let pos = w * 64 + bit as usize;
                        let r = p.rank[pos];
                        if best.is_none_or(|(br, _)| r > br) {
                            best = Some((r, (wa >> bit) & 1 == 1));
                        }
                    }
                }
                match best {
                    None => Ordering::Equal,
                    Some((_, true)) => Ordering::Greater,
                    Some((_, false)) => Ordering::Less,
                }
            }
            Order::HotTopic(h) => h.key(a).cmp(&h.key(b)),
            Order::Custom(o) => o.compare(a, b),
        }
    }

    /// Compares `parent ^ flips_a` with `parent ^ flips_b` (sorted flip
    /// lists) without building either point where the order allows it.
    pub fn compare_mutants(
        &self,
        parent: &SearchPoint,
        flips_a: &[usize],
        flips_b: &[usize],
    ) -> Ordering {
        match &self.order {
            Order::OneMax => {
                let delta = |f: &[usize]| -> i64 {
                    f.iter().map(|&i| if parent.get(i) { -1 } else { 1 }).sum()
                };
                delta(flips_a).cmp(&delta(flips_b))
            }
            Order::Binary => {
                let half = self.n / 2;
                let n = self.n as i64;
                let delta = |f: &[usize]| -> i64 {
                    f.iter()
                        .map(|&i| {
                            let w = if i < half { n } else { 1 };
                            if parent.get(i) {
                                -w
                            } else {
                                w
                            }
                        })
                        .sum()
                };
                delta(flips_a).cmp(&delta(flips_b))
            }
            Order::BinaryValue => lex_mutants(parent, flips_a, flips_b, |i| i as u32),
            Order::Permuted(p) => lex_mutants(parent, flips_a, flips_b, |i| p.rank[i]),
            Order::HotTopic(_) | Order::Custom(_) => {
                let a = parent.with_flips(flips_a);
                let b = parent.with_flips(flips_b);
                self.compare_unchecked(&a, &b)
            }
        }
    }

    /// Numeric fitness when it is exactly representable, `None` otherwise.
    ///
    /// HotTopic reports the order-preserving encoding
    /// `level·(n+1)² + hot·(n+1) + rest` of its lexicographic key.
    pub fn value(&self, x: &SearchPoint) -> Option<f64> {
        if x.len() != self.n {
            return None;
        }
        match &self.order {
            Order::OneMax => Some(x.onemax() as f64),
            Order::Binary => {
                let half = self.n / 2;
                let first = (0..half).filter(|&i| x.get(i)).count() as f64;
                Some(first * self.n as f64 + (x.onemax() as f64 - first))
            }
            Order::BinaryValue if self.n <= 53 => Some(
                (0..self.n)
                    .filter(|&i| x.get(i))
                    .map(|i| (1u64 << i) as f64)
                    .sum(),
            ),
            Order::Permuted(p) if self.n <= 53 => Some(
                p.perm
                    .iter()
                    .enumerate()
                    .filter(|(_, &pos)| x.get(pos as usize))
                    .map(|(i, _)| (1u64 << i) as f64)
                    .sum(),
            ),
            Order::HotTopic(h) => {
                let (l, hot, rest) = h.key(x);
                let m = (self.n + 1) as f64;
                Some(l as f64 * m * m + hot as f64 * m + rest as f64)
            }
            Order::Custom(o) => o.value(x),
            _ => None,
        }
    }

    /// True iff `x` is the all-ones optimum.
    pub fn is_optimum(&self, x: &SearchPoint) -> bool {
        x.zeromax() == 0
    }

    /// Snapshot of the current generation's hidden state.
    pub fn dump(&self) -> InstanceDump {
        let (permutation, hot_topic) = match &self.order {
            Order::Permuted(p) => (Some(p.perm.clone()), None),
            Order::HotTopic(h) => (
                None,
                Some(HotTopicDump {
                    a_sets: h.a_sets.clone(),
                    b_sets: h.b_sets.clone(),
                    threshold: h.threshold,
                }),
            ),
            _ => (None, None),
        };
        InstanceDump {
            spec: self.spec.clone(),
            n: self.n,
            permutation,
            hot_topic,
        }
    }

    /// Rebuilds a frozen single-generation instance from a dump.
    pub fn from_dump(dump: &InstanceDump) -> Result<Self> {
        let n = dump.n;
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        let order = match (&dump.spec, &dump.permutation, &dump.hot_topic) {
            (FunctionSpec::OneMax, None, None) => Order::OneMax,
            (FunctionSpec::Binary, None, None) => Order::Binary,
            (FunctionSpec::BinaryValue, None, None) => Order::BinaryValue,
            (_, Some(perm), None) => {
                if perm.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: perm.len(),
                    });
                }
                Order::Permuted(Arc::new(Permutation::new(perm.clone())?))
            }
            (FunctionSpec::HotTopic { .. }, None, Some(h)) => {
                let in_range =
                    |sets: &Vec<Vec<u32>>| sets.iter().flatten().all(|&i| (i as usize) < n);
                if h.a_sets.len() != h.b_sets.len() || !in_range(&h.a_sets) || !in_range(&h.b_sets)
                {
                    return Err(invalid("hot_topic", "level sets are inconsistent with n"));
                }
                Order::HotTopic(Arc::new(HotTopicLevels::from_sets(
                    n,
                    h.a_sets.clone(),
                    h.b_sets.clone(),
                    h.threshold,
                )))
            }
            _ => {
                return Err(invalid(
                    "dump",
                    "dump does not describe a replayable instance",
                ))
            }
        };
        Ok(Self {
            spec: dump.spec.clone(),
            n,
            order,
            adversary: None,
            spot_checks: DEFAULT_SPOT_CHECKS,
        })
    }
}

fn lex_mutants(
    parent: &SearchPoint,
    a: &[usize],
    b: &[usize],
    rank: impl Fn(usize) -> u32,
) -> Ordering {
    // Only positions in the symmetric difference of the flip sets differ.
    let (mut i, mut j) = (0, 0);
    let mut best: Option<(u32, usize, bool)> = None;
    let mut consider = |pos: usize, in_a: bool| {
        let r = rank(pos);
        if best.is_none_or(|(br, _, _)| r > br) {
            best = Some((r, pos, in_a));
        }
    };
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&pa), Some(&pb)) if pa == pb => {
                i += 1;
                j += 1;
            }
            (Some(&pa), Some(&pb)) if pa < pb => {
                consider(pa, true);
                i += 1;
            }
            (Some(_), Some(&pb)) => {
                consider(pb, false);
                j += 1;
            }
            (Some(&pa), None) => {
                consider(pa, true);
                i += 1;
            }
            (None, Some(&pb)) => {
                consider(pb, false);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    match best {
        None => Ordering::Equal,
        Some((_, pos, in_a)) => {
            // The flipped side holds the complement of the parent bit.
            let flipped_side_has_one = !parent.get(pos);
            if flipped_side_has_one == in_a {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
    }
}

/// Checks `k` dominated pairs: half drawn around the parent (one zero-bit
/// set), half between random points.
fn spot_check(
    instance: &FitnessInstance,
    parent: &SearchPoint,
    k: usize,
    rng: &mut RngStream,
) -> Result<(), String> {
    let n = instance.n;
    let zeros: Vec<usize> = (0..n).filter(|&i| !parent.get(i)).collect();
    for check in 0..k {
        let (hi, lo) = if check % 2 == 0 && !zeros.is_empty() {
            let i = zeros[rng.random_range(0..zeros.len())];
            (parent.with_flips(&[i]), parent.clone())
        } else {
            dominated_pair(n, rng)
        };
        let got = instance.compare_unchecked(&hi, &lo);
        if got != Ordering::Greater {
            return Err(format!(
                "dominating point {hi:?} compared {got:?} to {lo:?}"
            ));
        }
    }
    Ok(())
}

/// A random pair `(x, y)` where `y` is `x` with a nonempty random subset of
/// its one-bits cleared.
pub fn dominated_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (SearchPoint, SearchPoint) {
    let mut x = SearchPoint::zeros(n).expect("n >= 1");
    for i in 0..n {
        if rng.random::<bool>() {
            x.set(i, true);
        }
    }
    let mut ones: Vec<usize> = (0..n).filter(|&i| x.get(i)).collect();
    if ones.is_empty() {
        let i = rng.random_range(0..n);
        x.set(i, true);
        ones.push(i);
    }
    let mut y = x.clone();
    let forced = ones[rng.random_range(0..ones.len())];
    y.set(forced, false);
    for &i in &ones {
        if i != forced && rng.random::<bool>() {
            y.set(i, false);
        }
    }
    (x, y)
}

/// JSON-serialisable snapshot of an instance's hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDump {
    pub spec: FunctionSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hot_topic: Option<HotTopicDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotTopicDump {
    pub a_sets: Vec<Vec<u32>>,
    pub b_sets: Vec<Vec<u32>>,
    pub threshold: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str) -> SearchPoint {
        s.parse().unwrap()
    }

    fn rng() -> RngStream {
        RngStream::new(5, 5)
    }

    fn stat(spec: FunctionSpec, n: usize) -> FitnessInstance {
        FitnessInstance::new(&spec, n, &mut rng()).unwrap()
    }

    #[test]
    fn onemax_value() {
        let f = stat(FunctionSpec::OneMax, 10);
        assert_eq!(f.value(&SearchPoint::ones(10).unwrap()), Some(10.0));
        let f = stat(FunctionSpec::OneMax, 7);
        assert_eq!(f.value(&SearchPoint::ones(7).unwrap()), Some(7.0));
    }

    #[test]
    fn binary_value_and_compare() {
        let f = stat(FunctionSpec::Binary, 4);
        assert_eq!(f.value(&pt("1100")), Some(8.0));
        assert_eq!(f.value(&pt("0011")), Some(2.0));
        assert_eq!(
            f.compare(&pt("1100"), &pt("0011")).unwrap(),
            Ordering::Greater
        );
    }

    #[test]
    fn binary_value_weights_follow_bit_index() {
        // f(x) = sum 2^{i-1} x_i with x_1 written first.
        let f = stat(FunctionSpec::BinaryValue, 3);
        assert_eq!(f.value(&pt("101")), Some(5.0));
        assert_eq!(f.value(&pt("011")), Some(6.0));
        assert_eq!(f.compare(&pt("101"), &pt("011")).unwrap(), Ordering::Less);
        assert_eq!(
            f.compare(&pt("101"), &pt("110")).unwrap(),
            Ordering::Greater
        );
    }

    #[test]
    fn reflexive_equal() {
        let mut r = rng();
        for spec in [
            FunctionSpec::OneMax,
            FunctionSpec::Binary,
            FunctionSpec::BinaryValue,
            FunctionSpec::DynamicBinVal,
            FunctionSpec::hot_topic_default(),
        ] {
            let f = FitnessInstance::new(&spec, 100, &mut r).unwrap();
            let x = SearchPoint::new_random(100, &mut r).unwrap();
            assert_eq!(f.compare(&x, &x).unwrap(), Ordering::Equal, "{spec}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = stat(FunctionSpec::OneMax, 4);
        assert!(matches!(
            f.compare(&pt("101"), &pt("1010")),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn is_optimum_cases() {
        let f = stat(FunctionSpec::OneMax, 5);
        assert!(f.is_optimum(&pt("11111")));
        assert!(!f.is_optimum(&pt("11011")));
        let f = stat(FunctionSpec::OneMax, 1);
        assert!(f.is_optimum(&pt("1")));
    }

    #[test]
    fn hot_topic_rejects_beta_above_alpha() {
        let spec = FunctionSpec::HotTopic {
            levels: 10,
            alpha: 0.1,
            beta: 0.2,
            epsilon: 0.05,
        };
        let err = FitnessInstance::new(&spec, 100, &mut rng()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beta <= alpha"), "{msg}");
        let spec = FunctionSpec::HotTopic {
            levels: 10,
            alpha: 0.25,
            beta: 0.05,
            epsilon: 1.0,
        };
        assert!(FitnessInstance::new(&spec, 100, &mut rng())
            .unwrap_err()
            .to_string()
            .contains("epsilon"));
    }

    #[test]
    fn hot_topic_level_set_sizes() {
        let f = stat(FunctionSpec::hot_topic_default(), 100);
        let dump = f.dump();
        let h = dump.hot_topic.unwrap();
        assert_eq!(h.a_sets.len(), 100);
        for (a, b) in h.a_sets.iter().zip(&h.b_sets) {
            assert_eq!(a.len(), 25);
            assert_eq!(b.len(), 5);
            assert!(b.iter().all(|i| a.contains(i)));
        }
    }

    #[test]
    fn dynamic_binval_has_permutation() {
        let f = stat(FunctionSpec::DynamicBinVal, 5);
        let mut perm = f.dump().permutation.unwrap();
        perm.sort();
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn static_advance_is_identity() {
        let f = stat(FunctionSpec::Binary, 20);
        let mut r = rng();
        let x = SearchPoint::new_random(20, &mut r).unwrap();
        let g = f.advance(3, &x, &mut r).unwrap();
        for _ in 0..200 {
            let a = SearchPoint::new_random(20, &mut r).unwrap();
            let b = SearchPoint::new_random(20, &mut r).unwrap();
            assert_eq!(f.compare(&a, &b).unwrap(), g.compare(&a, &b).unwrap());
        }
    }

    #[test]
    fn mutant_comparison_matches_full_comparison() {
        let mut r = RngStream::new(77, 1);
        let n = 150;
        let sampler = crate::bitstring::BitFlipSampler::new(n, 4.0).unwrap();
        for spec in [
            FunctionSpec::OneMax,
            FunctionSpec::Binary,
            FunctionSpec::BinaryValue,
            FunctionSpec::DynamicBinVal,
            FunctionSpec::hot_topic_default(),
        ] {
            let f = FitnessInstance::new(&spec, n, &mut r).unwrap();
            let mut fa = Vec::new();
            let mut fb = Vec::new();
            for _ in 0..2000 {
                let parent = SearchPoint::new_random(n, &mut r).unwrap();
                sampler.sample_into(&mut r, &mut fa);
                sampler.sample_into(&mut r, &mut fb);
                let full = f
                    .compare(&parent.with_flips(&fa), &parent.with_flips(&fb))
                    .unwrap();
                assert_eq!(f.compare_mutants(&parent, &fa, &fb), full, "{spec}");
                let vs_parent = f.compare(&parent.with_flips(&fa), &parent).unwrap();
                assert_eq!(f.compare_mutants(&parent, &fa, &[]), vs_parent, "{spec}");
            }
        }
    }

    #[test]
    fn dump_round_trips_through_json() {
        let mut r = rng();
        for spec in [
            FunctionSpec::DynamicBinVal,
            FunctionSpec::hot_topic_default(),
        ] {
            let f = FitnessInstance::new(&spec, 64, &mut r).unwrap();
            let json = serde_json::to_string(&f.dump()).unwrap();
            let back: InstanceDump = serde_json::from_str(&json).unwrap();
            let g = FitnessInstance::from_dump(&back).unwrap();
            for _ in 0..500 {
                let a = SearchPoint::new_random(64, &mut r).unwrap();
                let b = SearchPoint::new_random(64, &mut r).unwrap();
                assert_eq!(f.compare(&a, &b).unwrap(), g.compare(&a, &b).unwrap());
            }
        }
    }

    #[test]
    fn spec_labels_parse_back() {
        for spec in [
            FunctionSpec::OneMax,
            FunctionSpec::Binary,
            FunctionSpec::BinaryValue,
            FunctionSpec::DynamicBinVal,
            FunctionSpec::hot_topic_default(),
            FunctionSpec::AdversarialHook {
                strategy: "ones-first".into(),
            },
        ] {
            assert_eq!(spec.label().parse::<FunctionSpec>().unwrap(), spec);
        }
        assert!("jump".parse::<FunctionSpec>().is_err());
        assert!("hook-nope".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn spec_toml_rejects_unknown_keys() {
        let ok: FunctionSpec = toml::from_str(
            "kind = \"hot_topic\"\nL = 100\nalpha = 0.25\nbeta = 0.05\nepsilon = 0.05",
        )
        .unwrap();
        assert_eq!(ok, FunctionSpec::hot_topic_default());
        assert!(toml::from_str::<FunctionSpec>("kind = \"one_max\"\nextra = 1").is_err());
        assert!(toml::from_str::<FunctionSpec>("kind = \"one_max\"\nalpha = 0.1").is_err());
        assert!(toml::from_str::<FunctionSpec>("kind = \"hot_topic\"\nL = 100").is_err());
        assert_eq!(
            toml::from_str::<FunctionSpec>("kind = \"dynamic_bin_val\"").unwrap(),
            FunctionSpec::DynamicBinVal
        );
        assert_eq!(
            toml::from_str::<FunctionSpec>("kind = \"dynbinval\"").unwrap(),
            FunctionSpec::DynamicBinVal
        );
        assert_eq!(
            toml::to_string(&FunctionSpec::OneMax).unwrap().trim(),
            "kind = \"onemax\""
        );
        let text = toml::to_string(&FunctionSpec::hot_topic_default()).unwrap();
        assert_eq!(
            toml::from_str::<FunctionSpec>(&text).unwrap(),
            FunctionSpec::hot_topic_default()
        );
    }

    #[derive(Debug)]
    struct Cheater;

    impl Adversary for Cheater {
        fn name(&self) -> &str {
            "cheater"
        }

        fn choose(
            &self,
            _t: u64,
            parent: &SearchPoint,
            _rng: &mut RngStream,
        ) -> Result<FitnessInstance> {
            FitnessInstance::custom(parent.len(), Arc::new(Antitone))
        }
    }

    #[test]
    fn non_monotone_hook_is_detected() {
        let f = FitnessInstance::with_adversary(30, Arc::new(Cheater)).unwrap();
        let mut r = rng();
        let x = SearchPoint::new_random(30, &mut r).unwrap();
        let err = f.advance(4, &x, &mut r).unwrap_err();
        assert!(matches!(err, Error::HookViolation { generation: 4, .. }));
    }

    #[test]
    fn ones_first_adversary_punishes_any_lost_one() {
        let f = stat(
            FunctionSpec::AdversarialHook {
                strategy: "ones-first".into(),
            },
            40,
        );
        let mut r = rng();
        let parent = SearchPoint::new_random(40, &mut r).unwrap();
        let g = f.advance(0, &parent, &mut r).unwrap();
        let one = (0..40).find(|&i| parent.get(i)).unwrap();
        let zeros: Vec<usize> = (0..40).filter(|&i| !parent.get(i)).collect();
        let mut flips = zeros.clone();
        flips.push(one);
        flips.sort();
        // gaining every zero-bit does not compensate for one lost one-bit
        assert_eq!(g.compare_mutants(&parent, &flips, &[]), Ordering::Less);
        assert_eq!(g.compare_mutants(&parent, &zeros, &[]), Ordering::Greater);
    }
}

//! Potential functions `g(x, λ) = ZeroMax(x) + h(λ)` and the exact
//! probabilities of the offspring events used to bound their drift.
//!
//! Four penalty families are provided:
//!
//! | family | `h(λ)` |
//! |--------|--------|
//! | G1 | `-K1 · min{0, log_F(λ/λmax)}` |
//! | G2 | `K2 · max{0, 1/λ - 1/λmax}` |
//! | G3 | `-K1 · min{0, log_F(λ/λmax)} + K2 · exp(-K3 λ)` |
//! | G4 | `-K4 · log_F²(λF)` |
//!
//! with `λmax = F^{1/s} · n`. G1–G3 are non-negative and bounded, so `g`
//! is sandwiched around ZeroMax; G4 is negative and unbounded.

use serde::{Deserialize, Serialize};

use crate::bitstring::SearchPoint;
use crate::error::{invalid, Result};

/// Penalty family with its own constants. Constants of different families
/// are unrelated even where they share a name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum Family {
    G1 { k1: f64 },
    G2 { k2: f64 },
    G3 { k1: f64, k2: f64, k3: f64 },
    G4 { k4: f64 },
}

impl Family {
    pub const fn g1() -> Self {
        Family::G1 { k1: 1.0 }
    }

    pub const fn g2() -> Self {
        Family::G2 { k2: 1.0 }
    }

    pub const fn g3() -> Self {
        Family::G3 {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
        }
    }

    pub const fn g4() -> Self {
        Family::G4 { k4: 20.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::G1 { .. } => "G1",
            Family::G2 { .. } => "G2",
            Family::G3 { .. } => "G3",
            Family::G4 { .. } => "G4",
        }
    }

    /// G4 is used for lower bounds: its drift is reported as `G^{t+1} - G^t`.
    pub fn reversed(&self) -> bool {
        matches!(self, Family::G4 { .. })
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("constant must be positive, got {v}")))
            }
        };
        match *self {
            Family::G1 { k1 } => positive("K1", k1),
            Family::G2 { k2 } => positive("K2", k2),
            Family::G3 { k1, k2, k3 } => {
                positive("K1", k1)?;
                positive("K2", k2)?;
                positive("K3", k3)
            }
            Family::G4 { k4 } => positive("K4", k4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: Family,
    #[serde(rename = "F")]
    pub f: f64,
    pub s: f64,
    pub n: usize,
}

impl PotentialSpec {
    pub fn new(family: Family, f: f64, s: f64, n: usize) -> Result<Self> {
        family.validate()?;
        if !(f > 1.0) || !f.is_finite() {
            return Err(invalid("F", format!("need F > 1, got {f}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid("s", format!("need s > 0, got {s}")));
        }
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        Ok(Self { family, f, s, n })
    }

    /// `F^{1/s} · n`.
    pub fn lambda_max(&self) -> f64 {
        self.f.powf(1.0 / self.s) * self.n as f64
    }

    fn log_f(&self, v: f64) -> f64 {
        v.ln() / self.f.ln()
    }

    /// The penalty `h(λ)`.
    pub fn h(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 1.0) || lambda.is_nan() {
            return Err(invalid("lambda", format!("need lambda >= 1, got {lambda}")));
        }
        Ok(self.h_unchecked(lambda))
    }

    pub(crate) fn h_unchecked(&self, lambda: f64) -> f64 {
        let lmax = self.lambda_max();
        let log_ratio_penalty = |k1: f64| -k1 * self.log_f(lambda / lmax).min(0.0);
        match self.family {
            Family::G1 { k1 } => log_ratio_penalty(k1),
            Family::G2 { k2 } => k2 * (1.0 / lambda - 1.0 / lmax).max(0.0),
            Family::G3 { k1, k2, k3 } => log_ratio_penalty(k1) + k2 * (-k3 * lambda).exp(),
            Family::G4 { k4 } => {
                let l = self.log_f(lambda) + 1.0;
                -k4 * l * l
            }
        }
    }

    /// `ZeroMax(x) + h(λ)`.
    pub fn g(&self, x: &SearchPoint, lambda: f64) -> Result<f64> {
        x.check_len(self.n)?;
        Ok(x.zeromax() as f64 + self.h(lambda)?)
    }

    /// Gaps `(lower, upper)` with `g - lower <= ZeroMax <= g + upper`.
    /// `upper` is always 0. Unavailable for G4.
    pub fn sandwich_bounds(&self) -> Result<(f64, f64)> {
        let lmax = self.lambda_max();
        let lower = match self.family {
            Family::G1 { k1 } => k1 * self.log_f(lmax),
            Family::G2 { k2 } => k2 * (1.0 - 1.0 / lmax),
            Family::G3 { k1, k2, .. } => k1 * self.log_f(lmax) + k2,
            Family::G4 { .. } => {
                return Err(invalid(
                    "family",
                    "G4 has no sandwich bound: |g - ZeroMax| is unbounded in lambda",
                ))
            }
        };
        Ok((lower, 0.0))
    }
}

/// `h(λ)` for a spec (see [`PotentialSpec::h`]).
pub fn eval_h(spec: &PotentialSpec, lambda: f64) -> Result<f64> {
    spec.h(lambda)
}

/// `g(x, λ)` for a spec (see [`PotentialSpec::g`]).
pub fn eval_g(spec: &PotentialSpec, x: &SearchPoint, lambda: f64) -> Result<f64> {
    spec.g(x, lambda)
}

fn check_event_domain(n: usize, z: usize, c: f64, offspring: u64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "dimension must be at least 1"));
    }
    if z > n {
        return Err(invalid(
            "Z",
            format!("need 0 <= Z <= n, got Z = {z}, n = {n}"),
        ));
    }
    if !(c > 0.0 && c <= n as f64) {
        return Err(invalid("c", format!("need 0 < c <= n, got {c}")));
    }
    if offspring == 0 {
        return Err(invalid("offspring", "need at least one offspring"));
    }
    Ok(())
}

/// `(1 - p)^k` for `p = c/n`, accurate for small `p`.
fn keep_prob(p: f64, k: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else if p >= 1.0 {
        0.0
    } else {
        (k * (-p).ln_1p()).exp()
    }
}

/// Probability that every offspring flips at least one one-bit of a parent
/// with `Z` zero-bits.
pub fn prob_a_bar(n: usize, z: usize, c: f64, offspring: u64) -> Result<f64> {
    check_event_domain(n, z, c, offspring)?;
    let child_keeps_ones = keep_prob(c / n as f64, (n - z) as f64);
    Ok((1.0 - child_keeps_ones).powf(offspring as f64))
}

/// Probability that no offspring flips a zero-bit.
pub fn prob_b_bar(n: usize, z: usize, c: f64, offspring: u64) -> Result<f64> {
    check_event_domain(n, z, c, offspring)?;
    Ok(keep_prob(c / n as f64, z as f64 * offspring as f64))
}

/// `1 - exp(-½ c e^{-c} · offspring · Z / n)`, a lower bound on the
/// probability of a strict improvement valid for every monotone function.
pub fn success_prob_lower_bound(n: usize, z: usize, c: f64, offspring: u64) -> Result<f64> {
    check_event_domain(n, z, c, offspring)?;
    if z == 0 {
        return Err(invalid("Z", "the bound needs Z >= 1"));
    }
    let rate = 0.5 * c * (-c).exp() * offspring as f64 * z as f64 / n as f64;
    Ok(-(-rate).exp_m1())
}

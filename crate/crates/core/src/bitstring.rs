//! Packed bitstrings and the standard bit-mutation operator.
//!
//! Offspring are represented as sorted lists of flipped positions relative
//! to the parent. The EA only materialises the selected child, which keeps
//! the per-offspring cost proportional to the number of flips rather than n.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

const WORD: usize = 64;

/// A point of {0,1}^n stored as packed 64-bit words.
///
/// Position `i` (0-based) corresponds to the bit x_{i+1}. Padding bits in
/// the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SearchPoint {
    n: usize,
    words: Vec<u64>,
}

impl SearchPoint {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        Ok(Self {
            n,
            words: vec![0; n.div_ceil(WORD)],
        })
    }

    pub fn ones(n: usize) -> Result<Self> {
        let mut x = Self::zeros(n)?;
        for w in &mut x.words {
            *w = u64::MAX;
        }
        x.clear_padding();
        Ok(x)
    }

    /// Uniformly random point: every bit is 1 with probability 1/2.
    pub fn new_random(n: usize, rng: &mut RngStream) -> Result<Self> {
        let mut x = Self::zeros(n)?;
        for w in &mut x.words {
            *w = rng.random();
        }
        x.clear_padding();
        Ok(x)
    }

    /// All-ones with exactly `zeros` zero-bits at uniformly random positions.
    pub fn with_zeromax(n: usize, zeros: usize, rng: &mut RngStream) -> Result<Self> {
        if zeros > n {
            return Err(invalid("zeros", format!("{zeros} exceeds n = {n}")));
        }
        let mut x = Self::ones(n)?;
        for i in rand::seq::index::sample(rng, n, zeros) {
            x.set(i, false);
        }
        Ok(x)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut x = Self::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            x.set(i, b);
        }
        Ok(x)
    }

    fn clear_padding(&mut self) {
        let rem = self.n % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.n);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn apply_flips(&mut self, flips: &[usize]) {
        for &i in flips {
            self.flip(i);
        }
    }

    pub fn with_flips(&self, flips: &[usize]) -> SearchPoint {
        let mut y = self.clone();
        y.apply_flips(flips);
        y
    }

    pub fn onemax(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of zero-bits; 0 iff this is the all-ones optimum.
    pub fn zeromax(&self) -> usize {
        self.n - self.onemax()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.get(i))
    }

    /// True iff `self_i >= other_i` for every position.
    pub fn dominates(&self, other: &SearchPoint) -> bool {
        self.n == other.n
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| b & !a == 0)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.n,
            });
        }
        Ok(())
    }
}

impl fmt::Display for SearchPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SearchPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n <= 128 {
            write!(f, "SearchPoint({self})")
        } else {
            write!(f, "SearchPoint(n={}, zeromax={})", self.n, self.zeromax())
        }
    }
}

/// Parses `x_1 x_2 ... x_n` written left to right, e.g. `"10110"`.
impl FromStr for SearchPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(invalid("bits", format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        SearchPoint::from_bits(&bits)
    }
}

// Serialised as the `x_1 ... x_n` bit string.
impl Serialize for SearchPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SearchPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Below this flip probability the sampler draws the flip count first.
const BINOMIAL_THRESHOLD: f64 = 0.1;

/// Standard bit mutation with rate `c/n`, prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct BitFlipSampler {
    n: usize,
    p: f64,
    count: Option<Binomial>,
}

impl BitFlipSampler {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "dimension must be at least 1"));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(invalid(
                "c",
                format!("mutation constant must be positive, got {c}"),
            ));
        }
        if c > n as f64 {
            return Err(invalid(
                "c",
                format!("c = {c} exceeds n = {n}; rate c/n must be <= 1"),
            ));
        }
        let p = c / n as f64;
        let count = if p < BINOMIAL_THRESHOLD {
            Some(Binomial::new(n as u64, p).map_err(|e| invalid("c", e.to_string()))?)
        } else {
            None
        };
        Ok(Self { n, p, count })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self) -> f64 {
        self.p
    }

    /// Writes the sorted flipped positions of one offspring into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        match &self.count {
            Some(binomial) => {
                let k = binomial.sample(rng) as usize;
                if k == 0 {
                    return;
                }
                if k <= 16 {
                    while out.len() < k {
                        let i = rng.random_range(0..self.n);
                        if !out.contains(&i) {
                            out.push(i);
                        }
                    }
                } else {
                    out.extend(rand::seq::index::sample(rng, self.n, k));
                }
                out.sort_unstable();
            }
            None => {
                for i in 0..self.n {
                    if rng.random::<f64>() < self.p {
                        out.push(i);
                    }
                }
            }
        }
    }
}

/// Returns a copy of `x` with each bit flipped independently with probability `c/n`.
pub fn mutate(x: &SearchPoint, c: f64, rng: &mut RngStream) -> Result<SearchPoint> {
    let sampler = BitFlipSampler::new(x.len(), c)?;
    let mut flips = Vec::new();
    sampler.sample_into(rng, &mut flips);
    Ok(x.with_flips(&flips))
}

/// Number of zero-bits of `x`.
pub fn zeromax(x: &SearchPoint) -> usize {
    x.zeromax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng(seed: u64) -> RngStream {
        RngStream::new(seed, 0)
    }

    #[test]
    fn zeromax_examples() {
        assert_eq!(SearchPoint::ones(8).unwrap().zeromax(), 0);
        assert_eq!(SearchPoint::zeros(8).unwrap().zeromax(), 8);
        let x: SearchPoint = "10110".parse().unwrap();
        assert_eq!(zeromax(&x), 2);
        assert_eq!(x.to_string(), "10110");
    }

    #[test]
    fn rejects_empty_dimension() {
        assert!(SearchPoint::new_random(0, &mut rng(1)).is_err());
        assert!(SearchPoint::zeros(0).is_err());
        assert!("".parse::<SearchPoint>().is_err());
    }

    #[test]
    fn rejects_bad_mutation_constant() {
        let x = SearchPoint::ones(10).unwrap();
        assert!(mutate(&x, 0.0, &mut rng(1)).is_err());
        assert!(mutate(&x, -1.0, &mut rng(1)).is_err());
        assert!(mutate(&x, 10.5, &mut rng(1)).is_err());
        assert!(mutate(&x, 10.0, &mut rng(1)).is_ok());
    }

    #[test]
    fn single_bit_initialisation_is_fair() {
        let mut r = rng(3);
        let draws = 100_000;
        let ones = (0..draws)
            .filter(|_| SearchPoint::new_random(1, &mut r).unwrap().get(0))
            .count();
        let frac = ones as f64 / draws as f64;
        assert!((0.49..=0.51).contains(&frac), "{frac}");
    }

    #[test]
    fn random_init_mean_onemax() {
        let mut r = rng(4);
        let mean = (0..1000)
            .map(|_| SearchPoint::new_random(1000, &mut r).unwrap().onemax() as f64)
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 500.0).abs() <= 50.0, "{mean}");
    }

    #[test]
    fn random_init_replays() {
        let a = SearchPoint::new_random(777, &mut RngStream::new(9, 3)).unwrap();
        let b = SearchPoint::new_random(777, &mut RngStream::new(9, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn padding_stays_clear() {
        let x = SearchPoint::new_random(70, &mut rng(5)).unwrap();
        assert_eq!(x.words()[1] >> 6, 0);
        let ones = SearchPoint::ones(70).unwrap();
        assert_eq!(ones.onemax(), 70);
    }

    #[test]
    fn vanishing_rate_never_flips() {
        let x = SearchPoint::new_random(10, &mut rng(6)).unwrap();
        let mut r = rng(7);
        for _ in 0..10_000 {
            assert_eq!(mutate(&x, 1e-9, &mut r).unwrap(), x);
        }
    }

    #[test]
    fn per_bit_path_is_used_for_large_rates() {
        let s = BitFlipSampler::new(10, 2.0).unwrap();
        assert!(s.count.is_none());
        let s = BitFlipSampler::new(100, 2.0).unwrap();
        assert!(s.count.is_some());
    }

    #[test]
    fn per_position_frequency_both_paths() {
        // c/n = 0.04 (binomial path) and c/n = 0.3 (Bernoulli path)
        for (n, c) in [(50usize, 2.0), (20usize, 6.0)] {
            let sampler = BitFlipSampler::new(n, c).unwrap();
            let mut r = rng(11);
            let trials = 200_000;
            let mut counts = vec![0usize; n];
            let mut flips = Vec::new();
            for _ in 0..trials {
                sampler.sample_into(&mut r, &mut flips);
                for &i in &flips {
                    counts[i] += 1;
                }
            }
            let p = c / n as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            for (i, &k) in counts.iter().enumerate() {
                let freq = k as f64 / trials as f64;
                assert!(
                    (freq - p).abs() <= 4.0 * sigma,
                    "n={n} pos {i}: {freq} vs {p}"
                );
            }
        }
    }

    #[test]
    fn flips_are_sorted_and_distinct() {
        let sampler = BitFlipSampler::new(40, 3.0).unwrap();
        let mut r = rng(12);
        let mut flips = Vec::new();
        for _ in 0..10_000 {
            sampler.sample_into(&mut r, &mut flips);
            assert!(flips.windows(2).all(|w| w[0] < w[1]));
        }
    }

    proptest! {
        #[test]
        fn zeromax_plus_onemax_is_n(n in 1usize..300, seed in any::<u64>()) {
            let x = SearchPoint::new_random(n, &mut rng(seed)).unwrap();
            prop_assert_eq!(x.zeromax() + x.onemax(), n);
        }

        #[test]
        fn zeromax_change_matches_flipped_bits(n in 1usize..200, c in 0.1f64..1.0, seed in any::<u64>()) {
            let mut r = rng(seed);
            let x = SearchPoint::new_random(n, &mut r).unwrap();
            let sampler = BitFlipSampler::new(n, c * n as f64).unwrap();
            let mut flips = Vec::new();
            sampler.sample_into(&mut r, &mut flips);
            let ones_flipped = flips.iter().filter(|&&i| x.get(i)).count() as i64;
            let zeros_flipped = flips.len() as i64 - ones_flipped;
            let y = x.with_flips(&flips);
            prop_assert_eq!(y.zeromax() as i64 - x.zeromax() as i64, ones_flipped - zeros_flipped);
        }

        #[test]
        fn mutate_leaves_parent_untouched(seed in any::<u64>()) {
            let mut r = rng(seed);
            let x = SearchPoint::new_random(64, &mut r).unwrap();
            let before = x.clone();
            let _ = mutate(&x, 5.0, &mut r).unwrap();
            prop_assert_eq!(x, before);
        }
    }
}

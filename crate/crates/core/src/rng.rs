//! Seeded, order-independent random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit master seed and
//! positioned on one of its 2^64 independent streams. Stream ids are derived
//! by hashing structured coordinates (run index, role, ...) with a
//! SplitMix64 finaliser, so a run's randomness never depends on how many
//! other runs exist or in which order they execute.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a derived sub-stream inside one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Init,
    Mutation,
    Environment,
    Trial,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Init => 0x1001,
            StreamRole::Mutation => 0x2002,
            StreamRole::Environment => 0x3003,
            StreamRole::Trial => 0x4004,
        }
    }
}

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a stream id.
pub fn derive_stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| mix64(acc ^ mix64(p)))
}

/// A reproducible random stream identified by `(master_seed, stream_id)`.
///
/// Streams are not `Sync`-shared: each executor owns its own stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream for `role`, independent of this stream's position.
    pub fn derive(&self, role: StreamRole) -> RngStream {
        RngStream::new(
            self.master_seed,
            derive_stream_id(&[self.stream_id, role.tag()]),
        )
    }

    /// A fresh stream for the `index`-th item of `role` (e.g. Monte-Carlo batches).
    pub fn derive_indexed(&self, role: StreamRole, index: u64) -> RngStream {
        RngStream::new(
            self.master_seed,
            derive_stream_id(&[self.stream_id, role.tag(), index]),
        )
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

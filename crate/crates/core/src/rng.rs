//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed, so identical
//! seeds give identical draws on every platform. Replicate seeds are derived
//! from a master seed by a counter-based mix and never depend on the order in
//! which replicates are executed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded in experiment reports.
pub const RNG_ID: &str = "ChaCha8Rng(seed_from_u64); replicate seed = splitmix64(master ^ splitmix64(index + 1))";

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for replicate `index` under `master`.
    pub fn for_replicate(master: u64, index: u64) -> Self {
        Self::new(replicate_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, e.g. for a survey drawn after a simulation.
    pub fn fork(&self, stream: u64) -> Self {
        Self::new(replicate_seed(self.seed, stream))
    }
}

impl RngCore for SeededRng {
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

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded random-number stream.
//!
//! Every sampler in this crate draws from an [`RngStream`], a ChaCha8
//! generator wrapped so that a given seed plus a given call sequence yields
//! bit-identical draws on every platform and every run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream: identical seed + identical call sequence
/// implies identical draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Creates a stream from a 64-bit seed.
    pub fn new(seed: u64) -> Self {
        RngStream {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derives an independent stream for a parallel chain: `seed + index`.
    pub fn for_chain(seed: u64, chain_index: u64) -> Self {
        RngStream::new(seed.wrapping_add(chain_index))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

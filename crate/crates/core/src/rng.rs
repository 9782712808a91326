//! Reproducible random streams.
//!
//! A [`RandomStream`] is a ChaCha8 keystream keyed by a 64-bit master seed and
//! positioned on one of 2^64 independent stream indices. Two streams with the
//! same `(seed, stream)` pair produce bit-identical output; distinct stream
//! indices never share state, so replicates can run in any order on any
//! number of threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct RandomStream {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            seed,
            stream,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on the half-open interval (0, 1].
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.inner.random::<f64>()
    }

    /// Uniform draw on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RandomStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Deterministic, injective assignment of stream indices to replicates.
///
/// Replicate `i` always receives stream `i`; the master seed keys the
/// keystream itself, so `(seed, i)` fully determines replicate `i`.
pub fn seed_streams(master_seed: u64, replicate_count: usize) -> Vec<RandomStream> {
    (0..replicate_count as u64)
        .map(|i| RandomStream::new(master_seed, i))
        .collect()
}

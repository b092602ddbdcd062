//! Portable pseudo-random streams for fixture generation.
//!
//! The generator is SplitMix64 (state initialised to the seed itself). A
//! master stream seeded with the instance seed yields, in order, the seeds of
//! the `blobs`, `features`, `noise` and `points` streams. Derived values:
//!
//! - uniform in `[0, 1)`: `(next >> 11) * 2^-53`
//! - integer in `[0, n)`: `(next as u128 * n) >> 64`
//! - standard normal: Box–Muller cosine branch with `u1 = 1 - uniform()`,
//!   `u2 = uniform()`, i.e. `sqrt(-2 ln u1) * cos(2π u2)`; one normal per
//!   two uniforms, nothing cached.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

pub struct Stream(SplitMix64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub struct Streams {
    pub blobs: Stream,
    pub features: Stream,
    pub noise: Stream,
    pub points: Stream,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut master = Stream::new(seed);
        Streams {
            blobs: Stream::new(master.next_u64()),
            features: Stream::new(master.next_u64()),
            noise: Stream::new(master.next_u64()),
            points: Stream::new(master.next_u64()),
        }
    }
}

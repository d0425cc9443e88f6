//! Deterministic random numbers.
//!
//! Every randomized path in this crate (weight init, data generation,
//! shuffling) goes through [`SplitMix64`] so that a `(seed, call sequence)`
//! pair reproduces the exact same stream on any platform, and so that
//! alternative implementations of the experiments can replay it: the state
//! update and output mix are the standard splitmix64 constants, uniforms
//! are the top 53 bits scaled by 2^-53, and normal deviates come from the
//! Box-Muller transform with the sine branch cached.

use libm::{cos, log, sin, sqrt};

const TWO_PI: f64 = 2.0 * core::f64::consts::PI;

/// splitmix64 generator with a cached Box-Muller spare.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, spare_normal: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal deviate via Box-Muller.
    ///
    /// Each transform yields two deviates; the sine branch is cached and
    /// returned on the next call.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let mut u1 = self.next_f64();
        if u1 < 1e-300 {
            u1 = 1e-300; // log(0) guard; probability ~2^-53 per draw
        }
        let u2 = self.next_f64();
        let r = sqrt(-2.0 * log(u1));
        let theta = TWO_PI * u2;
        self.spare_normal = Some(r * sin(theta));
        r * cos(theta)
    }

    /// Uniform index in `[0, n)`. Uses a plain modulo; the bias is
    /// below 2^-32 for every `n` used here and keeps the stream trivial
    /// to replay elsewhere.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_index(i + 1);
            xs.swap(i, j);
        }
    }
}

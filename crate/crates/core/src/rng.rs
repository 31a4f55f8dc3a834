//! Splittable counter-based randomness.
//!
//! Every consumer of randomness in this crate derives its own stream from a
//! master seed through a chain of `stream`/`site`/`index` splits. Derivation
//! is a pure function of the path, so regenerating one site's arrivals (or one
//! replica's environment) in isolation reproduces exactly the values the full
//! run saw, regardless of generation order or thread count.

use rand_core::{impls, RngCore};

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

// Tags keep the three split kinds from aliasing each other: stream(a).site(b)
// and stream(b).site(a) land in unrelated states.
const TAG_STREAM: u64 = 0x5354_5245_414d_0001;
const TAG_SITE: u64 = 0x5349_5445_0000_0002;
const TAG_INDEX: u64 = 0x4944_5800_0000_0003;

/// Well-known stream labels, so call sites cannot collide by accident.
pub mod stream {
    pub const CLOCK: u64 = 1;
    pub const ENV: u64 = 2;
    pub const INIT: u64 = 3;
    pub const WALKER: u64 = 4;
    pub const SOUP: u64 = 5;
    pub const MARKS: u64 = 6;
    pub const ARROWS_RIGHT: u64 = 7;
    pub const ARROWS_LEFT: u64 = 8;
    pub const REPLICA: u64 = 9;
    pub const OBSERVABLE: u64 = 10;
}

/// SplitMix64 generator with pure key-derivation splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRng {
    state: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        SplitRng {
            state: mix64(seed ^ GOLDEN),
        }
    }

    #[inline]
    fn derive(&self, tag: u64, value: u64) -> Self {
        let mut z = self.state ^ tag.wrapping_mul(GOLDEN);
        z = mix64(z);
        z = mix64(z ^ value.wrapping_mul(0xbf58_476d_1ce4_e5b9).wrapping_add(tag));
        SplitRng { state: z }
    }

    /// Independent named stream (see [`stream`] for labels).
    pub fn stream(&self, label: u64) -> Self {
        self.derive(TAG_STREAM, label)
    }

    /// Per-site stream; `x` may be negative.
    pub fn site(&self, x: i64) -> Self {
        self.derive(TAG_SITE, x as u64)
    }

    /// Per-replica or other indexed stream.
    pub fn index(&self, i: u64) -> Self {
        self.derive(TAG_INDEX, i)
    }

    #[inline]
    pub fn next(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn f64(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exp(1) draw (ziggurat).
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        rand::Rng::sample(self, rand_distr::Exp1)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.f64() < p
    }

    /// Poisson draw; usable for large means.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean == 0.0 {
            return 0;
        }
        let d = rand_distr::Poisson::new(mean).expect("positive finite mean");
        rand::Rng::sample(self, d) as u64
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.f64()
    }
}

impl RngCore for SplitRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.next()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        impls::fill_bytes_via_next(self, dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand_core::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

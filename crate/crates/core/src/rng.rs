//! Splittable counter-based generator used for every random draw.
//!
//! A stream is a 64-bit key plus a counter. Draw `i` of a stream is
//! `mix(key + (i + 1) * GAMMA)` where `mix` is the SplitMix64 finaliser.
//! Child streams are derived with `split(label)`, whose key is
//! `mix(key ^ mix(label + GAMMA))`. Nothing depends on thread scheduling or
//! platform: the same (seed, labels, counter) always gives the same bits.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedStream {
    key: u64,
    counter: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { key: mix(seed), counter: 0 }
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, label: u64) -> SeedStream {
        SeedStream { key: mix(self.key ^ mix(label.wrapping_add(GAMMA))), counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Stable labels for the streams derived from a run seed.
pub mod labels {
    pub const INIT: u64 = 0x1;
    pub const TRAIN: u64 = 0x2;
    pub const VALIDATION: u64 = 0x3;
    pub const TEST: u64 = 0x4;
    pub const LESION: u64 = 0x5;
    pub const REACH: u64 = 0x10;
    pub const HOLD: u64 = 0x11;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_split_independent() {
        let mut a = SeedStream::new(7);
        let mut b = SeedStream::new(7);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let base = SeedStream::new(7);
        let mut c1 = base.split(1);
        let mut c2 = base.split(2);
        assert_ne!(c1.next_u64(), c2.next_u64());
        // splitting does not consume the parent
        assert_eq!(base, SeedStream::new(7));
    }

    #[test]
    fn uniform_range_and_mean() {
        let mut s = SeedStream::new(42);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = s.next_f64();
            assert!((0.0..1.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn first_draws_are_pinned() {
        // Cross-platform reproducibility: the bit pattern is part of the contract.
        let mut s = SeedStream::new(0);
        let first = s.next_u64();
        let mut again = SeedStream::new(0);
        assert_eq!(first, again.next_u64());
        assert_eq!(first, mix(mix(0).wrapping_add(GAMMA)));
    }
}

//! Keyed, counter-based randomness.
//!
//! Every random quantity in the pipeline (delays, coins, relabelings) is a
//! pure function of a seed and a tuple of coordinates, so results do not
//! depend on evaluation order or on which executor produced them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags separating the independent uses of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Mpx = 0x6d70_78,
    Compress = 0x6c63,
    Boruvka = 0x626f_72,
    Relabel = 0x7265_6c,
    Machine = 0x6d61_63,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A point in the keyed random space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Key(u64);

impl Key {
    pub fn new(seed: u64, stream: Stream) -> Self {
        Key(splitmix(splitmix(seed) ^ stream as u64))
    }

    pub fn with(self, part: u64) -> Self {
        Key(splitmix(self.0 ^ splitmix(part.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn bits(self) -> u64 {
        splitmix(self.0)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn unit(self) -> f64 {
        (self.bits() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn coin(self) -> bool {
        self.bits() & 1 == 1
    }

    /// Exponential variate with the given rate.
    pub fn exponential(self, rate: f64) -> f64 {
        -(1.0 - self.unit()).ln() / rate
    }

    /// A full generator seeded from this key, for bulk draws such as shuffles.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.bits())
    }
}

//! Named, independently seeded random streams.
//!
//! Every concern (traffic, mobility, MAC selection, PHY draws, placement)
//! draws from its own stream, and per-vehicle concerns get one stream per
//! vehicle. A stream's seed is a hash of the master seed and the stream's
//! identity, so adding draws to one stream never shifts another.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Identity of a random stream: a symbolic name plus an index (vehicle id,
/// or 0 for global streams).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub name: &'static str,
    pub index: u64,
}

impl StreamId {
    pub const fn global(name: &'static str) -> Self {
        Self { name, index: 0 }
    }

    pub const fn indexed(name: &'static str, index: u64) -> Self {
        Self { name, index }
    }
}

pub const PLACEMENT: &str = "placement";
pub const MOBILITY: &str = "mobility";
pub const TRAFFIC: &str = "traffic";
pub const MAC: &str = "mac-selection";
pub const PHY: &str = "phy";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from `(master_seed, stream_id)`.
pub fn stream_seed(master_seed: u64, id: StreamId) -> u64 {
    let name = fnv1a(id.name.as_bytes());
    splitmix64(splitmix64(master_seed ^ name).wrapping_add(id.index))
}

/// A seeded generator bound to one stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        Self {
            id,
            rng: ChaCha8Rng::seed_from_u64(stream_seed(master_seed, id)),
        }
    }

    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Uniform integer in `[lo, hi]` inclusive.
    ///
    /// Panics if `lo > hi`.
    pub fn draw_uniform_int(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "draw_uniform_int: empty range [{lo}, {hi}]");
        self.rng.random_range(lo..=hi)
    }

    /// Uniform index in `[0, n)`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index: empty range");
        self.rng.random_range(0..n)
    }

    /// Uniform real in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Access to the underlying generator for distribution sampling.
    pub fn raw(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Free-function form used by the MAC and traffic modules.
pub fn draw_uniform_int(stream: &mut RngStream, lo: i64, hi: i64) -> i64 {
    stream.draw_uniform_int(lo, hi)
}

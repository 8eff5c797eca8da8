//! Deterministic random-number substreams.
//!
//! Every stochastic stage draws from a ChaCha8 stream keyed by the master
//! seed, a per-stage tag and an index (drop, sample chunk, scan point).
//! Results therefore never depend on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stage tags keep the streams of different pipeline stages disjoint.
pub mod tag {
    pub const CLOUD: u64 = 0x636c_6f75;
    pub const EXCITATION: u64 = 0x6578_6369;
    pub const COUNTS: u64 = 0x636e_7473;
    pub const LINESHAPE: u64 = 0x6c69_6e65;
    pub const SCAN: u64 = 0x7363_616e;
    pub const JITTER: u64 = 0x6a69_7474;
    pub const CALIBRATION: u64 = 0x6361_6c69;
    pub const PULSE: u64 = 0x7075_6c73;
    pub const NOISE: u64 = 0x6e6f_6973;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for `(master, tag, index)`.
pub fn substream(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(tag)));
    rng.set_stream(index);
    rng
}

/// Seed for a child computation that takes its own master seed.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    substream(master, tag, index).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |mut r: ChaCha8Rng| -> Vec<u64> { (0..4).map(|_| r.random()).collect() };
        let a = draw(substream(7, tag::CLOUD, 3));
        let b = draw(substream(7, tag::CLOUD, 3));
        assert_eq!(a, b);
        let mut other = substream(7, tag::CLOUD, 4);
        assert_ne!(a[0], other.random::<u64>());
        let mut other_tag = substream(7, tag::COUNTS, 3);
        assert_ne!(a[0], other_tag.random::<u64>());
    }
}

//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by `(master seed, stream tag, index)` so that results do not depend
//! on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_LAYOUT: u64 = 0x4c41_594f;
pub(crate) const TAG_SHADOW: u64 = 0x5348_4144;
pub(crate) const TAG_SHADOW_INDEP: u64 = 0x5348_4149;
pub(crate) const TAG_TRIAL: u64 = 0x5452_4941;
pub(crate) const TAG_RANDOM_MODE: u64 = 0x524e_444d;
pub(crate) const TAG_DROP: u64 = 0x4452_4f50;
pub(crate) const TAG_MSP: u64 = 0x4d53_5050;
pub(crate) const TAG_COLOCATED: u64 = 0x434f_4c4f;
pub(crate) const TAG_CHANNEL: u64 = 0x4348_414e;
pub(crate) const TAG_PILOT: u64 = 0x5049_4c4f;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream tag and an index into a child seed.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(tag)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub(crate) fn stream(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}

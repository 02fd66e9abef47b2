//! Counter-based stream seeding.
//!
//! `seed_split(master, i)` is a bijection in `i` for every fixed master
//! (an odd-multiplier Weyl step followed by the invertible SplitMix64
//! finalizer), so distinct trajectory indices never share a stream and the
//! mapping does not depend on which worker runs which trajectory.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trajectory stream seed.
pub fn seed_split(master_seed: u64, trajectory_index: u64) -> u64 {
    mix64(master_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(trajectory_index.wrapping_add(1))))
}

/// Master seed of an independent family of streams, e.g. a second
/// ensemble that must not share noise with the first.
pub fn derive_master(master_seed: u64, label: u64) -> u64 {
    mix64(mix64(master_seed ^ 0x5851_F42D_4C95_7F2D) ^ mix64(label.wrapping_add(GOLDEN_GAMMA)))
}

pub type StreamRng = Xoshiro256PlusPlus;

pub fn stream(master_seed: u64, trajectory_index: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed_split(master_seed, trajectory_index))
}

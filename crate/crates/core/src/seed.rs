//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed plus a purpose
//! tag and a list of integer coordinates (trial, reviewer, ...). Streams never
//! share state, so results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags, one per independent stream family.
pub mod tag {
    pub const ASSIGNMENT: u64 = 0x6173_7369_676e;
    pub const CLUSTERING: u64 = 0x636c_7573_7472;
    pub const NOISE: u64 = 0x6e_6f69_7365;
    pub const NOMINATION: u64 = 0x6e6f_6d69_6e61;
    pub const PARTITION: u64 = 0x7061_7274;
    pub const EDP: u64 = 0x65_6470;
}

// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit sub-seed from `master`, a purpose `tag` and coordinates.
pub fn derive(master: u64, tag: u64, coords: &[u64]) -> u64 {
    let mut h = mix(master ^ mix(tag));
    for &c in coords {
        h = mix(h ^ mix(c.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(master: u64, tag: u64, coords: &[u64]) -> Rng {
    rng(derive(master, tag, coords))
}

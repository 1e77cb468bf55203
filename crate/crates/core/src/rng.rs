//! Seed derivation for reproducible parallel runs.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose key is
//! `mix(master, parts...)` and whose stream number is a [`Role`] tag. The
//! mixing function folds each 64-bit part into the state with the SplitMix64
//! finaliser:
//!
//! ```text
//! h = splitmix(master ^ 0x9E3779B97F4A7C15)
//! for p in parts: h = splitmix(h ^ splitmix(p + 0x9E3779B97F4A7C15))
//! ```
//!
//! so a cell's stream depends only on its own coordinates and adding cells
//! never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    TrainF = 1,
    TrainG = 2,
    TestF = 3,
    TestG = 4,
    Split = 5,
    TieBreak = 6,
    Shuffle = 7,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master ^ GOLDEN), |h, &p| {
        splitmix64(h ^ splitmix64(p.wrapping_add(GOLDEN)))
    })
}

pub fn substream(master: u64, parts: &[u64], role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master, parts));
    rng.set_stream(role as u64);
    rng
}

//! Seed derivation for independent deterministic RNG streams.
//!
//! Every randomized routine in the crate seeds its own ChaCha8 generator so
//! results are reproducible across platforms. Sub-streams (per run, per
//! tree, per surrogate dataset) are derived from a master seed with a
//! splitmix64 mix so neighboring seeds do not produce correlated streams.

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of an independent sub-stream from a master seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

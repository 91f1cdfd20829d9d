//! Deterministic seed derivation. Every randomized job in the pipeline owns an
//! RNG seeded from the global seed plus its coordinates, so results do not
//! depend on thread scheduling or job order.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a sequence of stream coordinates (stable across runs
/// and platforms, unlike the std hasher).
pub fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ 0x6a09_e667_f3bc_c908);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

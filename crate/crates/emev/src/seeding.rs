//! Counter-based seed derivation.
//!
//! Every sample owns an independent RNG stream derived from
//! `(master_seed, sample_index)`, so generation is order-independent and
//! safely parallel.

/// splitmix64 finalization step; full-period bijective mixer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a per-sample seed from a master seed and a sample counter.
///
/// Stable across platforms and releases; dataset manifests record only the
/// master seed and rely on this derivation for bit-exact regeneration.
pub fn sample_seed(master_seed: u64, sample_index: u64) -> u64 {
    mix(mix(master_seed) ^ mix(sample_index.wrapping_add(0x51d2_c0de_0bad_5eed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_indices_give_distinct_seeds() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u64 {
            assert!(seen.insert(sample_seed(42, i)));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(sample_seed(7, 3), sample_seed(7, 3));
        assert_ne!(sample_seed(7, 3), sample_seed(8, 3));
    }
}

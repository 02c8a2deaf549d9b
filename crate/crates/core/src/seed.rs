//! Seed splitting. Replica `i` of a run with root seed `r` uses
//! `split(r, i)`, a SplitMix64 finalizer applied to `r ^ golden * (i + 1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn split(root: u64, index: u64) -> u64 {
    let mut x = root ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child generator for stream `index` of `root`.
pub fn child(root: u64, index: u64) -> SimRng {
    rng(split(root, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn split_is_deterministic_and_distinct() {
        assert_eq!(split(7, 3), split(7, 3));
        let s: HashSet<u64> = (0..10_000).map(|i| split(42, i)).collect();
        assert_eq!(s.len(), 10_000);
        assert_ne!(split(1, 0), split(2, 0));
    }
}

//! Deterministic seed derivation.
//!
//! Every randomized stage derives its own RNG seed from a master seed plus
//! structural tags (viewpoint index, class, sample number, ...), so results
//! never depend on execution order and any single cell can be reproduced in
//! isolation.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mix a master seed with structural tags into an independent stream seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(2, &[2, 3]));
        assert_ne!(derive_seed(1, &[]), derive_seed(2, &[]));
        // Nested tags must not collide with flattened ones.
        assert_ne!(derive_seed(derive_seed(1, &[2]), &[3]), derive_seed(1, &[2, 3]));
    }

    #[test]
    fn outputs_spread_over_the_range() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..1000u64 {
            seen.insert(derive_seed(42, &[i]));
        }
        assert_eq!(seen.len(), 1000);
    }
}

//! Stable derivation of child RNG seeds from a master seed.
//!
//! Sweeps, scenario generation and per-entity noise streams all need their
//! own RNGs so that changing one consumer does not shift the random numbers
//! seen by another. Children are derived by mixing the master seed with a
//! list of context words (axis index, repetition, entity id, a module tag)
//! through the SplitMix64 finalizer. The mixing is pure integer arithmetic,
//! so derived seeds are identical on every platform and every run.

/// One round of the SplitMix64 output function.
///
/// This is the standard 64-bit finalizer (Steele, Lea & Flood); it is
/// bijective and avalanches well, which is all seed derivation needs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an ordered list of context words.
///
/// Distinct word lists yield (with overwhelming probability) distinct
/// seeds, and the derivation is stable across runs and platforms.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0x6a09_e667_f3bc_c908);
    for &w in words {
        state = splitmix64(state ^ splitmix64(w));
    }
    state
}

/// Convenience tags that keep unrelated consumers of the same master seed
/// on disjoint random streams.
pub mod tags {
    /// Scenario arrival/dwell/motion stream.
    pub const SCENARIO: u64 = 0x5343_454e;
    /// Per-identity appearance descriptor stream.
    pub const DESCRIPTOR: u64 = 0x4445_5343;
    /// Observation noise stream (pixels and descriptor noise).
    pub const OBSERVATION: u64 = 0x4f42_5356;
    /// Link shadowing draws.
    pub const SHADOWING: u64 = 0x5348_4144;
    /// Packet-loss realizations.
    pub const LOSS: u64 = 0x4c4f_5353;
    /// Feature-map noise.
    pub const FEATURE: u64 = 0x4645_4154;
    /// Sweep-point repetition streams.
    pub const SWEEP: u64 = 0x5357_4550;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_deterministic() {
        let a = derive_seed(42, &[tags::SCENARIO, 3, 7]);
        let b = derive_seed(42, &[tags::SCENARIO, 3, 7]);
        assert_eq!(a, b);
    }

    #[test]
    fn context_words_separate_streams() {
        let base = derive_seed(42, &[tags::SCENARIO, 3, 7]);
        assert_ne!(base, derive_seed(42, &[tags::SCENARIO, 3, 8]));
        assert_ne!(base, derive_seed(42, &[tags::SCENARIO, 4, 7]));
        assert_ne!(base, derive_seed(42, &[tags::LOSS, 3, 7]));
        assert_ne!(base, derive_seed(43, &[tags::SCENARIO, 3, 7]));
    }

    #[test]
    fn word_order_matters() {
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }

    /// Frozen values guard against accidental changes to the mixer: any
    /// edit here silently reshuffles every seeded experiment downstream.
    #[test]
    fn mixer_is_frozen() {
        assert_eq!(derive_seed(0, &[]), 0x1ac0_46dd_a8e8_6e2a);
        assert_eq!(derive_seed(42, &[1, 2, 3]), 0x4d03_fc3a_d78e_2d6c);
    }
}

//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single 64-bit seed per operation.
//! Sub-streams (per sample, per path, per repetition) use a stateless
//! SplitMix64-style combiner so results do not depend on execution order.

/// Derives an independent child seed from `seed` and a stream index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the combined state.
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index)
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

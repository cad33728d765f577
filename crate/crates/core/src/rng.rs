//! Deterministic random streams.
//!
//! All sampling in this crate flows through ChaCha8 seeded explicitly, with
//! uniform doubles derived here from raw 64-bit output. Keeping the
//! bits-to-double mapping in-repo (rather than using a distribution library)
//! pins every sampled value: datasets and training runs stay byte-identical
//! across versions of the RNG crates.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream seeded from a single u64.
pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from a parent seed and an index, so any
/// element of a generated collection is regenerable in isolation.
/// SplitMix64 finalizer over `seed + (index+1) * golden`.
pub fn mix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform double in [0, 1) with 53 random bits.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in [lo, hi).
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(rng)
}

/// Uniform index in [0, n). Modulo bias is below 2^-50 for any n this crate
/// uses; determinism matters more here than that last epsilon of uniformity.
pub fn below(rng: &mut impl RngCore, n: usize) -> usize {
    assert!(n > 0, "below(rng, 0)");
    (rng.next_u64() % n as u64) as usize
}

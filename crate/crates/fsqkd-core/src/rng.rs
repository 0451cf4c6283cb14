//! Deterministic stream derivation and small-mean samplers.
//!
//! Every stochastic stage of a run (turbulence synthesis, tracking noise,
//! pulse-train generation, detection) owns an independent ChaCha8 stream
//! derived from `(seed, stage tag, index)`. The derivation is a fixed
//! convention: the three inputs are mixed through SplitMix64 into a 32-byte
//! stream key, so sub-streams are independent of the order in which stages
//! or trials execute, and identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream type used by every stage.
pub type StageRng = ChaCha8Rng;

/// SplitMix64 step; the standard finalizer used for seed expansion.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the stage tag, so streams are keyed by a stable label rather
/// than an enum discriminant that could drift.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Derive the stream for one stage of one trial.
///
/// `index` distinguishes repeated instances of the same stage (block number,
/// sweep point, tuning seed).
pub fn stage_rng(seed: u64, stage: &str, index: u64) -> StageRng {
    let mut state = seed
        ^ fnv1a64(stage.as_bytes()).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    StageRng::from_seed(key)
}

/// Poisson sampler given the precomputed threshold `quiet = exp(-mean)`.
///
/// Knuth's multiplication method with the caller-supplied first uniform:
/// the hot paths fold that first draw into other per-slot decisions and
/// precompute `quiet` once per transmittance bin.
#[inline]
pub fn sample_poisson_with(rng: &mut impl Rng, quiet: f64, first_uniform: f64) -> u32 {
    let mut product = first_uniform;
    let mut k = 0u32;
    while product > quiet {
        product *= rng.random::<f64>();
        k += 1;
    }
    k
}

/// Poisson sampler (Knuth multiplication method), exact for the small means
/// that occur per slot. Consumes `k + 1` uniforms to return `k`, so the
/// stream layout is identical wherever the same mean sequence is sampled.
pub fn sample_poisson(rng: &mut impl Rng, mean: f64) -> u32 {
    debug_assert!((0.0..64.0).contains(&mean), "mean {mean} out of range");
    let quiet = (-mean).exp();
    let first = rng.random::<f64>();
    sample_poisson_with(rng, quiet, first)
}

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

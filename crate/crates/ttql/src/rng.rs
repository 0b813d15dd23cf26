//! Deterministic random number generation.
//!
//! Every stochastic operation in this crate takes an explicit generator handle of
//! type [`DetRng`], and every seed is an explicit `u64`. There is no global or
//! thread-local randomness anywhere, so (inputs, seed) fully determines every
//! output, bit for bit, on every platform.
//!
//! Independent streams (per run, per suite component, per state-action pair) are
//! derived with [`child_seed`], a splitmix-style hash chain over a parent seed and
//! a tag path. Derivation is cheap and stateless: the same (seed, tags) always
//! names the same stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The repo-wide deterministic generator.
pub type DetRng = ChaCha8Rng;

/// Create the generator for `seed`.
pub fn rng_from_seed(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from `seed` and a tag path.
///
/// Each step of the chain mixes one tag with a splitmix64 finalizer, so
/// `child_seed(s, &[a, b])` == `child_seed(child_seed(s, &[a]), &[b])`.
pub fn child_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    for &tag in tags {
        state = splitmix64(state ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    state
}

/// Generator for the substream named by (seed, tags).
pub fn substream(seed: u64, tags: &[u64]) -> DetRng {
    rng_from_seed(child_seed(seed, tags))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

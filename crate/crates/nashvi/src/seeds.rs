//! Deterministic derivation of independent RNG substreams.
//!
//! Every random draw in the crate comes from a stream derived from the run's
//! base seed plus a list of integer tags (a domain constant followed by
//! indices such as the estimator call counter and the trajectory index).
//! Derivation is a SplitMix64 fold, so a stream's state depends only on
//! `(base, tags)` and never on how many draws other streams made. Rollouts
//! can therefore run under any parallel schedule and still produce
//! bit-identical results.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Each independent consumer of randomness gets its own tag.
pub mod domains {
    /// Per-trajectory streams of the G(PO)MDP estimator: tags
    /// `[TRAJECTORY, call_index, trajectory_index]`.
    pub const TRAJECTORY: u64 = 1;
    /// The output-index sampler `τ_K`: tags `[TAU]`.
    pub const TAU: u64 = 2;
    /// Auxiliary sampling in metrics (random points of the MVI residual).
    pub const METRICS: u64 = 3;
    /// General-purpose test streams.
    pub const TEST: u64 = 4;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 256-bit seed from a base seed and a tag list.
pub fn derive_seed(base: u64, tags: &[u64]) -> [u8; 32] {
    let mut state = base ^ 0xA076_1D64_78BD_642F;
    for &t in tags {
        // Fold each tag through the mixer so permuted tag lists differ.
        let mut ts = t ^ 0xE703_7ED1_A0B4_28DB;
        state ^= splitmix64(&mut ts);
        splitmix64(&mut state);
    }
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// A ChaCha stream addressed by `(base, tags)`.
pub fn stream(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(base, tags))
}

/// Draw an index from an unnormalized nonnegative weight vector.
///
/// Deterministic given the RNG state; the last index absorbs any floating
/// point slack in the cumulative sum.
pub fn sample_categorical<R: RngCore>(weights: &[f64], rng: &mut R) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    let u = rand::Rng::random::<f64>(rng) * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

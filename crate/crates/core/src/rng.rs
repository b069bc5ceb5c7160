//! Deterministic, splittable random-number streams.
//!
//! Every Monte Carlo trial draws from its own ChaCha8 sub-stream keyed by
//! `(seed, trial)`: the key comes from the 64-bit seed and the 64-bit stream
//! counter is the trial index. Trial t therefore produces the same draws no
//! matter how trials are partitioned across threads or how many trials run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for one trial: sub-stream `trial` of the generator family `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Derives an independent seed for a named purpose (calibration vs trials)
/// so that reusing one user-facing seed in two roles never aliases streams.
pub fn derive_seed(seed: u64, domain: u64) -> u64 {
    // splitmix64 finalizer; full-period bijection per domain.
    let mut z = seed ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

//! Counter-based RNG substream derivation, so parallel work items get
//! schedule-independent, platform-independent streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a deterministic RNG from a master seed and a tag path
/// (e.g. [sweep_point, replication]).
pub fn substream_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(master);
    for &t in tags {
        state = splitmix64(state ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    ChaCha8Rng::seed_from_u64(state)
}

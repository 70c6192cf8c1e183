//! Deterministic seed derivation.
//!
//! Every random stream in the pipeline is a ChaCha8 generator keyed by a
//! root seed mixed with a list of stream tags (candidate index, world index,
//! epoch, ...). Derived streams are independent of thread scheduling, so
//! parallel runs reproduce single-threaded results exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for seed mixing.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a root seed and a stream tag path into a single derived seed.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    let mut acc = splitmix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for &tag in stream {
        acc = splitmix64(acc ^ splitmix64(tag));
    }
    acc
}

/// Derive a generator from a root seed and a stream tag path.
pub fn derive_rng(seed: u64, stream: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed ^ 0x5851_f42d_4c95_7f2d);
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let mut acc = state ^ (i as u64).wrapping_mul(0xd605_0b55_c7a1_8a93);
        for &tag in stream {
            acc = splitmix64(acc ^ splitmix64(tag));
        }
        state = splitmix64(state);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

//! Counter-based random substreams.
//!
//! A stream is the ChaCha8 keystream for a key derived from the master seed,
//! at a stream id built from `(cell, replication)`. Any replication can be
//! regenerated in isolation, which is what makes parallel runs reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Replications per grid cell addressable without stream-id collisions.
pub const MAX_REPLICATIONS: u64 = 1 << 40;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_from_master(master_seed: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// The stream for replication `replication` of grid cell `cell`.
pub fn substream(master_seed: u64, cell: u64, replication: u64) -> StreamRng {
    assert!(cell < (1 << 24), "grid cell index {cell} out of range");
    assert!(replication < MAX_REPLICATIONS, "replication index out of range");
    let mut rng = ChaCha8Rng::from_seed(key_from_master(master_seed));
    rng.set_stream((cell << 40) | replication);
    rng
}

/// A single stream for one-off runs (CLI `test`/`simulate`).
pub fn single_stream(seed: u64) -> StreamRng {
    substream(seed, 0, 0)
}

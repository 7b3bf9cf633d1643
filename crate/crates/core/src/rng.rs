//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a stream keyed by the
//! master seed and a tuple of integers (a domain tag followed by indices).
//! The key is hashed into a ChaCha8 seed, so a draw depends only on its key
//! and never on the order in which other draws were made. Parallel schedules
//! therefore reproduce sequential output exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams for different purposes disjoint.
pub mod domain {
    pub const LATENT: u64 = 1;
    pub const QUERY_MAP: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SOLVER_START: u64 = 4;
    pub const RESAMPLE: u64 = 5;
    pub const TRIAL_SOLVER: u64 = 6;
    pub const REFERENCE: u64 = 7;
    pub const POOL: u64 = 8;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a seed and key into a single 64-bit value.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for (pos, &k) in key.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(k.wrapping_add((pos as u64 + 1).wrapping_mul(GOLDEN))));
    }
    h
}

/// Independent generator for `(seed, key)`.
pub fn substream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut h = derive_seed(seed, key);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        h = splitmix64(h);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

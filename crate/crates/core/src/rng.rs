//! Deterministic RNG stream derivation.
//!
//! Every random stream is keyed by a master seed plus a small tuple of labels
//! (player id, purpose, index). Streams never depend on scheduling order, so
//! parallel and sequential runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Replicate,
    NullSubset,
    Permutation,
    Generator,
    Training,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Replicate => 0x5245_504c,
            Purpose::NullSubset => 0x4e55_4c4c,
            Purpose::Permutation => 0x5045_524d,
            Purpose::Generator => 0x4745_4e52,
            Purpose::Training => 0x5452_4e47,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases (unlike `DefaultHasher`).
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derives an independent stream from `(master_seed, key, purpose, index)`.
pub fn stream(master_seed: u64, key: &str, purpose: Purpose, index: u64) -> StreamRng {
    let mut state = master_seed;
    let mut mix = splitmix64(&mut state) ^ fnv1a(key.as_bytes());
    mix = splitmix64(&mut mix) ^ purpose.tag();
    mix = splitmix64(&mut mix) ^ index;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut mix).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

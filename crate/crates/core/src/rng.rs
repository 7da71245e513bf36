//! Counter-based stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is a
//! hash of `(seed, replicate, component, salt)`. A realization therefore never
//! depends on which thread produced it or on how many replicates were drawn
//! before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Salt distinguishing the noise of the different constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Spectral = 0x5350_4543,
    Convolution = 0x434f_4e56,
    Markov = 0x4d41_524b,
    Likelihood = 0x4c49_4b45,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(seed, replicate, component)` triple.
pub fn stream(kind: StreamKind, seed: u64, replicate: u64, component: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for word in [replicate, component, kind as u64] {
        state ^= word.wrapping_mul(0xd6e8_feb8_6659_fd93) ^ acc;
        acc = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

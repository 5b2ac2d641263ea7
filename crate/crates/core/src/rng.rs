//! Deterministic random substreams.
//!
//! Every stochastic routine takes a root seed and derives an independent
//! ChaCha stream from `(root, label, index)`, so work can be split across
//! threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label/index pair.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label keeps distinct labels apart.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    let mut state = root ^ h.rotate_left(17);
    let a = splitmix64(&mut state);
    state ^= index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    a ^ splitmix64(&mut state)
}

pub fn substream(root: u64, label: &str, index: u64) -> StreamRng {
    let mut state = derive_seed(root, label, index);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    StreamRng::from_seed(seed)
}

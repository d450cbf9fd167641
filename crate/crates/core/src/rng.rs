//! Deterministic seed derivation.
//!
//! Every analysis flows from one master seed. Replicate-level streams are
//! derived with a counter so parallel runs are bit-reproducible at any
//! worker count.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

/// splitmix64 step, used to expand (master, stream) into a 256-bit seed.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG for a named stream of a master seed.
///
/// Stream 0 is conventionally the "driver" stream; replicate j uses
/// stream j + 1.
pub fn derive_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ stream.wrapping_mul(0xd1342543de82ef95);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

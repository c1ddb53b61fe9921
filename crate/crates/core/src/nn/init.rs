use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenseMatrix;

/// The generator used everywhere randomness is needed: ChaCha8, a
/// counter-based stream cipher whose output for a given seed is identical on
/// every platform.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a label (e.g. an image stem) using FNV-1a over the
/// label bytes followed by a splitmix64 finalizer, so seeds do not depend on
/// scheduling or on `std`'s randomized hasher.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base.wrapping_add(h))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Glorot/Xavier uniform initialization: i.i.d. `U[-L, L]` with
/// `L = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    glorot_uniform_with_rng(rows, cols, &mut rng_from_seed(seed))
}

pub fn glorot_uniform_with_rng(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    assert!(rows >= 1 && cols >= 1, "glorot_uniform needs a non-empty shape");
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-limit..=limit))
}

//! Deterministic random streams.
//!
//! Every unit of stochastic work (a replicate's data draw, one bootstrap
//! resample, one imputation) gets its own ChaCha stream whose key is derived
//! from the master seed and the unit's coordinates. Results therefore do not
//! depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Coordinates tags, so that e.g. imputation `(b, m)` and bootstrap `(m, b)`
/// never share a key.
pub mod tag {
    pub const DATA: u64 = 0x01;
    pub const ENGINE: u64 = 0x02;
    pub const DIRECT_IMPUTE: u64 = 0x10;
    pub const INNER_BOOT: u64 = 0x11;
    pub const OUTER_BOOT: u64 = 0x12;
    pub const BOOT_IMPUTE: u64 = 0x13;
    pub const CALIBRATION: u64 = 0x20;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a coordinate path into a 64-bit key.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0xA076_1D64_78BD_642F)))
    })
}

/// Independent stream for the given coordinates.
pub fn substream(master: u64, path: &[u64]) -> Stream {
    let mut state = derive_seed(master, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

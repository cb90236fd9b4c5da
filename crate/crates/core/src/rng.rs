//! Counter-keyed random streams.
//!
//! Every random draw in a campaign or bootstrap comes from a ChaCha stream
//! selected by hashing a tuple of integer keys, so results never depend on
//! the order in which cells are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key tuple into a single 64-bit stream identifier.
pub fn stream_id(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C909, |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

/// Independent generator for the cell identified by `keys` under `seed`.
pub fn keyed_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(keys));
    rng
}

/// Key for a floating-point coordinate, exact on its bit pattern.
pub fn float_key(v: f64) -> u64 {
    // Fold -0.0 onto 0.0.
    (v + 0.0).to_bits()
}

//! Deterministic seed derivation.
//!
//! Every invocation starts from one root seed; each module asks for a child
//! seed by label so that adding a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere randomness is needed.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Child seed of `parent` for the string `label`.
pub fn derive(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ splitmix64(fnv1a(label.as_bytes())))
}

/// Child seed of `parent` for an integer path component.
pub fn derive_n(parent: u64, n: u64) -> u64 {
    splitmix64(parent ^ splitmix64(n.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

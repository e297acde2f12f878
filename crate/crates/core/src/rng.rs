//! Labeled seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a root seed
//! through [`derive_seed`], so independent consumers (sampling, noise,
//! Poissonization, permutation replicas, experiment trials) never share a
//! stream and every run is reproducible from one 64-bit value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

/// Continue an FNV-1a hash `h` over more bytes.
pub fn fnv1a_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `root`, a label and an index.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let h = fnv1a(label.as_bytes());
    splitmix64(splitmix64(root ^ h).wrapping_add(splitmix64(index)))
}

/// Generator for the stream identified by `(root, label, index)`.
pub fn stream(root: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label, index))
}

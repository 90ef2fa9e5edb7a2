//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator. A stream is identified by a master
//! seed, a purpose tag and a list of indices; its 256-bit key is the SHA-256
//! digest of
//!
//! ```text
//! "raf-stream-v1" || master_seed (u64 LE) || len(tag) (u64 LE) || tag || index_0 (u64 LE) || ...
//! ```
//!
//! Both primitives are platform independent, so a given `(seed, tag, indices)`
//! triple produces the same bits everywhere. Plain `u64` seeds passed to
//! single-purpose functions (e.g. [`crate::sensing::sample_model`]) are keyed
//! the same way with an empty index list.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream_key(master_seed: u64, tag: &str, indices: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"raf-stream-v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    for idx in indices {
        hasher.update(idx.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

pub fn stream(master_seed: u64, tag: &str, indices: &[u64]) -> StreamRng {
    ChaCha8Rng::from_seed(stream_key(master_seed, tag, indices))
}

/// A child `u64` seed, for APIs that take a plain seed.
pub fn derive_seed(master_seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let key = stream_key(master_seed, tag, indices);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

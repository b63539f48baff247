//! Seeded random streams.
//!
//! Every run owns one master seed. Each consumer (environment, behaviour
//! policy, buffer sampling, weight init, reward noise, ...) gets its own
//! ChaCha stream whose key is `sha256(seed || label)`, so adding a new
//! consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub const ENV: &str = "env";
pub const POLICY: &str = "policy";
pub const BUFFER: &str = "buffer";
pub const INIT: &str = "init";
pub const NOISE: &str = "noise";
pub const EPER_INIT: &str = "eper-init";

pub fn derive_seed(seed: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

pub fn stream(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::from_seed(derive_seed(seed, label))
}

/// The bundle of independent streams a single run consumes.
#[derive(Clone, Debug)]
pub struct RunStreams {
    pub env: StreamRng,
    pub policy: StreamRng,
    pub buffer: StreamRng,
    pub init: StreamRng,
    pub noise: StreamRng,
    pub eper_init: StreamRng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            env: stream(seed, ENV),
            policy: stream(seed, POLICY),
            buffer: stream(seed, BUFFER),
            init: stream(seed, INIT),
            noise: stream(seed, NOISE),
            eper_init: stream(seed, EPER_INIT),
        }
    }
}

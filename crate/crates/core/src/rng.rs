//! Seeded random streams.
//!
//! Every random draw in the engine goes through a stream derived by hashing
//! its identifying parts, so neither worker count nor scheduling order can
//! perturb results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// SHA-256 over length-prefixed parts, truncated to 64 bits.
pub fn mix_seed(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Identifies one tool invocation's random stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamKey {
    pub global_seed: u64,
    pub episode_id: String,
    pub tool: String,
    /// How many times this tool was invoked earlier in the episode.
    pub ordinal: u32,
}

impl StreamKey {
    pub fn new(global_seed: u64, episode_id: &str, tool: &str, ordinal: u32) -> Self {
        Self {
            global_seed,
            episode_id: episode_id.to_string(),
            tool: tool.to_string(),
            ordinal,
        }
    }

    pub fn rng(&self) -> StreamRng {
        seeded(mix_seed(&[
            &self.global_seed.to_le_bytes(),
            self.episode_id.as_bytes(),
            self.tool.as_bytes(),
            &self.ordinal.to_le_bytes(),
        ]))
    }
}

/// Short stable digest of any serializable value (canonical JSON, keys sorted).
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    let out = Sha256::digest(&bytes);
    hex::encode(&out[..8])
}

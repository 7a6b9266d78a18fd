//! Per-subject randomized presentation order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ConditionSpec;
use crate::{Result, SessionError};

/// Seed for one subject: the first 8 bytes of SHA-256(study seed LE, subject id).
pub fn subject_seed(study_seed: u64, subject_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(study_seed.to_le_bytes());
    h.update(subject_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Playlist {
    pub subject_id: String,
    pub seed: u64,
    /// Condition indices in presentation order.
    pub order: Vec<usize>,
}

impl Playlist {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Seeded permutation of all conditions. Stimulus files are checked when the
/// study is created.
pub fn build_playlist(conditions: &[ConditionSpec], subject_id: &str, study_seed: u64) -> Result<Playlist> {
    if conditions.is_empty() {
        return Err(SessionError::Invalid("no conditions to present".into()));
    }
    let seed = subject_seed(study_seed, subject_id);
    let mut order: Vec<usize> = (0..conditions.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Playlist { subject_id: subject_id.to_string(), seed, order })
}

//! Reproducible random streams.
//!
//! Every random quantity in a trial comes from a ChaCha8 stream addressed by
//! `(master seed, replicate, cohort, purpose)`. The key is derived from the
//! first two, the 64-bit ChaCha stream id from the last two, so replicates
//! can run on any thread in any order and still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamKind {
    Chain = 1,
    Direction = 2,
    Outcomes = 3,
}

/// Seed identity of one trial: a master seed and a replicate number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSeed {
    pub master: u64,
    pub replicate: u64,
}

impl TrialSeed {
    pub const fn new(master: u64, replicate: u64) -> Self {
        Self { master, replicate }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = self.master ^ 0x6a09_e667_f3bc_c908;
        let mut key = [0u8; 32];
        for (n, chunk) in key.chunks_exact_mut(8).enumerate() {
            if n == 1 {
                state ^= self.replicate.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            }
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        key
    }

    /// Independent generator for `(cohort, kind)` within this trial.
    pub fn stream(&self, cohort: u32, kind: StreamKind) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream((u64::from(cohort) << 8) | kind as u64);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

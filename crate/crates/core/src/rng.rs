//! Deterministic random streams.
//!
//! Every Monte Carlo trial owns a ChaCha8 stream keyed by
//! `(master_seed, experiment_id, point_index, trial_index)`. The first three
//! components are mixed into the 256-bit ChaCha key, and the trial index
//! selects one of the 2^64 ChaCha streams under that key. A trial therefore
//! sees the same random numbers no matter which worker runs it or in what
//! order, which is what makes reports byte-identical across worker counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Streams reserved for scenario synthesis, disjoint from trial streams.
pub(crate) const CENTROID_STREAM: u64 = u64::MAX;
pub(crate) const OBSERVATION_STREAM: u64 = u64::MAX - 1;
pub(crate) const AUXILIARY_STREAM: u64 = u64::MAX - 2;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies one family of trial streams: one sweep point of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub experiment_id: u64,
    pub point_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, experiment_id: u64, point_index: u64) -> Self {
        Self {
            master_seed,
            experiment_id,
            point_index,
        }
    }

    /// Key used for scenario synthesis from a bare master seed.
    pub fn scenario(master_seed: u64) -> Self {
        Self::new(master_seed, 0, 0)
    }

    pub fn with_point(self, point_index: u64) -> Self {
        Self {
            point_index,
            ..self
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut state = self.master_seed;
        let mut words = [0u64; 4];
        words[0] = splitmix64(&mut state);
        state ^= self.experiment_id.wrapping_mul(0xd1b5_4a32_d192_ed03);
        words[1] = splitmix64(&mut state);
        state ^= self.point_index.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7);
        words[2] = splitmix64(&mut state);
        words[3] = splitmix64(&mut state);
        let mut bytes = [0u8; 32];
        for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        bytes
    }

    /// The random stream of one trial.
    pub fn stream(&self, trial_index: u64) -> SimRng {
        let mut rng = ChaCha8Rng::from_seed(self.key_bytes());
        rng.set_stream(trial_index);
        rng
    }
}

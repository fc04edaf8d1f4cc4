//! Seeded random streams. Every trial owns a ChaCha stream derived from the
//! master seed and its coordinates, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream of trial `trial` at SNR grid index `snr_idx`.
pub fn trial_rng(seed: u64, snr_idx: usize, trial: usize) -> TrialRng {
    stream_rng(seed, ((snr_idx as u64) << 32) | trial as u64)
}

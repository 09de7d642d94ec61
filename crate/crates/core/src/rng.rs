//! Seeding helpers. Every random operation owns one generator built from a
//! 64-bit seed; repeated trials derive their generators from a master seed by
//! selecting a ChaCha stream per trial index, so trials can be evaluated in
//! any order and still reproduce the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for trial `index` under `master`. Stream 0 is reserved for
/// single-shot use of the master seed itself.
pub fn for_trial(master: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index + 1);
    rng
}

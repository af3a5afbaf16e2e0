//! Seeded random streams. Every consumer derives its own ChaCha stream from the
//! replication seed so that draws never interleave between components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    GroundTruth,
    SigmoidParams,
    Features(u64),
    RewardNoise(u64),
    PolicyInit,
    Subsample,
    Fixture,
}

impl Stream {
    fn id(self) -> u64 {
        const TRIAL_SPACE: u64 = 1 << 40;
        match self {
            Stream::GroundTruth => 1,
            Stream::SigmoidParams => 2,
            Stream::PolicyInit => 3,
            Stream::Subsample => 4,
            Stream::Fixture => 5,
            Stream::Features(t) => TRIAL_SPACE + t,
            Stream::RewardNoise(t) => 2 * TRIAL_SPACE + t,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

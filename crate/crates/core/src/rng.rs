//! Named random sub-streams.
//!
//! Every random draw in a run comes from a ChaCha8 generator seeded with the
//! scenario seed and switched to a fixed stream id per purpose, so adding or
//! reordering consumers (or running them on other threads) never perturbs another
//! consumer's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Schedule,
    Payload,
    Noise,
    Comms,
    Calibration,
    SelfTest,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Schedule => 1,
            Stream::Payload => 2,
            Stream::Noise => 3,
            Stream::Comms => 4,
            Stream::Calibration => 5,
            Stream::SelfTest => 6,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}

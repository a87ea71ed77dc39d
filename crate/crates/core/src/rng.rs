//! Seed handling.
//!
//! All randomness comes from ChaCha8, a counter-based generator: the 64-bit
//! run seed selects the key and a per-purpose stream id selects an independent
//! keystream. Trial `i` of a Monte Carlo run always reads the same stream, so
//! results are identical whatever order or thread the trial runs on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent consumers of the same seed apart.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Word,
    Ladder,
    Trial(u64),
    Intervals,
    Atoms,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Word => 1,
            Stream::Ladder => 2,
            Stream::Intervals => 3,
            Stream::Atoms => 4,
            // the top bit marks trial streams so they never collide with the tags above
            Stream::Trial(i) => (1 << 63) | i,
        }
    }
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

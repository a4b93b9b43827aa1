//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64`, and normal
//! variates use the ziggurat transform of `rand_distr::StandardNormal`. Each
//! consumer gets its own ChaCha stream id, so scheduling scenarios, validation
//! trials and synthetic traces drawn from one seed never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Scheduling,
    Validation,
    SyntheticTrace,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Scheduling => 0,
            Stream::Validation => 1,
            Stream::SyntheticTrace => 2,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

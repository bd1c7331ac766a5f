//! Seeded deterministic randomness.
//!
//! Each simulation trial owns one master seed; the channel-quality process,
//! the arrival process and the reception draws consume from disjoint ChaCha
//! streams of that seed, so two schemes run at the same seed observe the
//! identical channel-quality and arrival traces while drawing receptions
//! independently of how many draws the other streams made.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named substreams of a trial seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Channel = 1,
    Arrivals = 2,
    Reception = 3,
    Service = 4,
}

/// Deterministic substream of `seed` for one purpose.
pub fn substream(seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Poisson sample by Knuth's product method; fine for the small means used
/// here (arrivals per transmission are well below 10).
pub fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> u32 {
    assert!((0.0..30.0).contains(&mean), "mean out of supported range");
    if mean == 0.0 {
        return 0;
    }
    let limit = (-mean).exp();
    let mut count = 0u32;
    let mut prod: f64 = rng.gen::<f64>();
    while prod > limit {
        count += 1;
        prod *= rng.gen::<f64>();
    }
    count
}

//! Seeded random streams.
//!
//! Every consumer gets its own ChaCha stream derived from the run seed, so
//! results do not depend on the order in which persons are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const POPULATION_STREAM: u64 = 0;

/// Stream used to synthesize the population.
pub fn population_rng(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POPULATION_STREAM);
    rng
}

/// Independent movement stream for one person.
pub fn person_rng(seed: u64, person: crate::PersonId) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(person.0.wrapping_add(1));
    rng
}

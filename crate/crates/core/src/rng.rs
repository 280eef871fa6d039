//! Named random sub-streams derived from one master seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that switching a
//! noise source off (and therefore drawing nothing from it) never shifts the
//! sequence seen by any other consumer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Weight, policy and critic initialization.
    Init,
    /// Additive white noise of the concentration field.
    FieldNoise,
    /// Gaussian policy draws for one agent.
    PolicySample(usize),
    /// Execution noise added to one agent's actions.
    ActionNoise(usize),
    /// Metabolic noise on one agent's observations.
    ObservationNoise(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 0,
            Stream::FieldNoise => 1,
            Stream::PolicySample(k) => (1 << 32) | k as u64,
            Stream::ActionNoise(k) => (2 << 32) | k as u64,
            Stream::ObservationNoise(k) => (3 << 32) | k as u64,
        }
    }
}

pub fn stream(master_seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which.id());
    rng
}

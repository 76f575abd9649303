//! Seeded random substreams.
//!
//! Every Monte Carlo run `i` owns three ChaCha8 streams derived from the
//! master seed: one for the true state, one for measurement outcomes and one
//! for direction choices. Streams are selected with ChaCha's stream counter,
//! so run `i` sees the same numbers regardless of how many runs precede it or
//! which thread executes it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STREAMS_PER_RUN: u64 = 3;

fn stream(master_seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id);
    rng
}

/// Stream used to draw the true state of run `run`.
pub fn state_stream(master_seed: u64, run: u64) -> ChaCha8Rng {
    stream(master_seed, STREAMS_PER_RUN * run)
}

/// Randomness consumed while measuring one ensemble.
#[derive(Debug, Clone)]
pub struct PathRng {
    /// Uniforms deciding measurement outcomes.
    pub outcomes: ChaCha8Rng,
    /// Uniforms used by randomized direction rules.
    pub choices: ChaCha8Rng,
}

impl PathRng {
    /// Path streams of Monte Carlo run `run`.
    pub fn for_run(master_seed: u64, run: u64) -> Self {
        Self {
            outcomes: stream(master_seed, STREAMS_PER_RUN * run + 1),
            choices: stream(master_seed, STREAMS_PER_RUN * run + 2),
        }
    }

    /// Streams for a standalone run outside any Monte Carlo batch.
    pub fn from_seed(seed: u64) -> Self {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        Self {
            outcomes: ChaCha8Rng::seed_from_u64(root.next_u64()),
            choices: ChaCha8Rng::seed_from_u64(root.next_u64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..8).map(|_| state_stream(42, 7).gen()).collect();
        let b: Vec<u64> = (0..8).map(|_| state_stream(42, 7).gen()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_are_distinct() {
        let first = |mut r: ChaCha8Rng| r.gen::<u64>();
        let p = PathRng::for_run(42, 7);
        let values = [
            first(state_stream(42, 7)),
            first(p.outcomes),
            first(p.choices),
            first(state_stream(42, 8)),
            first(state_stream(43, 7)),
        ];
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                assert_ne!(values[i], values[j]);
            }
        }
    }
}

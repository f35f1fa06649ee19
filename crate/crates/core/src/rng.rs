//! Seed splitting.
//!
//! Every run has one master 64-bit seed. Replica `r` draws from the ChaCha8
//! stream `r` keyed by the master seed, so any replica can be regenerated
//! on its own without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn replica_rng(master_seed: u64, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

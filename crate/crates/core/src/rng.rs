//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose key and
//! stream are a pure function of `(seed, replication, stream_id)`:
//!
//! * key bytes `0..8`  = `seed` (little endian),
//! * key bytes `8..16` = `replication` (little endian),
//! * key bytes `16..32` = `0`,
//! * ChaCha stream number = `stream_id`.
//!
//! Standard normals are drawn with the ziggurat sampler of `rand_distr`.
//! A driver for particle `i` in dimension `c` of a `d`-dimensional problem
//! uses `stream_id = i * d + c`, so a prefix of particles always sees the
//! same noise regardless of ensemble size or thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::num::Real;

/// Returns the generator for one `(seed, replication, stream_id)` triple.
pub fn stream_rng(seed: u64, replication: u64, stream_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replication.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

/// Stream id of the driver for `particle` in coordinate `coord`.
#[inline]
pub fn driver_stream(particle: usize, coord: usize, dim: usize) -> u64 {
    (particle * dim + coord) as u64
}

/// Fills `out` with independent standard normal draws.
pub fn fill_standard_normal<F: Real, R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [F]) {
    for x in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = F::lit(z);
    }
}

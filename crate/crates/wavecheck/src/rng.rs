//! Seeded generator streams. Parallel work is split into a fixed number of
//! chunks, each driven by its own stream of a master seed, so results do not
//! depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Draws a fresh master seed from `rng` for a batch of streams.
pub fn fork<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}

/// Splits `total` items into chunks of at most `chunk`; returns `(start, len)`.
pub fn chunks(total: usize, chunk: usize) -> Vec<(usize, usize)> {
    (0..total.div_ceil(chunk))
        .map(|i| (i * chunk, chunk.min(total - i * chunk)))
        .collect()
}

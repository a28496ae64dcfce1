use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Deterministic sub-stream of a master seed. Work items that may run on any
/// thread draw from their own stream so results do not depend on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rows are simulated in chunks of this size, one stream per chunk.
pub(crate) const CHUNK: usize = 2048;

/// Evaluates `f(row, rng)` for `row` in `0..n` in parallel chunks, each chunk
/// drawing from its own stream, and returns the results in row order.
pub(crate) fn par_rows<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    let per: Vec<Vec<T>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|i| f(c * CHUNK + i, &mut rng)).collect()
        })
        .collect();
    per.into_iter().flatten().collect()
}

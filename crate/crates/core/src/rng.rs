//! Seeded random streams.
//!
//! All randomized stages draw from ChaCha8 with the 64-bit seed as key and a
//! per-item stream number, so item `i` sees the same numbers whether items
//! are processed in order, in parallel or alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Maps `f` over `items`, on `jobs` worker threads when `jobs > 1`.
/// Output order always matches input order.
pub(crate) fn par_map<T, U, Func>(jobs: usize, items: &[T], f: Func) -> Vec<U>
where
    T: Sync,
    U: Send,
    Func: Fn(usize, &T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()),
        Err(e) => {
            log::warn!("falling back to one worker: {e}");
            items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
    }
}

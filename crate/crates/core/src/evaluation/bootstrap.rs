use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Interval;
use crate::error::EvalError;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_boot: 50,
            level: 0.95,
        }
    }
}

impl BootstrapConfig {
    fn check(&self) -> Result<(), EvalError> {
        if self.n_boot == 0 {
            return Err(EvalError::InvalidBootstrap("n_boot must be >= 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(EvalError::InvalidBootstrap("level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Indices of resample `b`: `n` draws with replacement from `0..n`, taken
/// from stream `b` of `seed`.
pub fn resample_indices(n: usize, b: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, b as u64);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Nearest-rank percentile: the smallest element whose empirical CDF
/// reaches `q`. `sorted` must be ascending and nonempty.
pub fn percentile<S: Clone>(sorted: &[S], q: f64) -> S {
    let n = sorted.len();
    // tolerate rounding in q * n landing just above an integer
    let rank = (q * n as f64 - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, n) - 1].clone()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult<S> {
    pub interval: Interval<S>,
    /// Metric value on each resample, in resample order.
    pub replicates: Vec<S>,
}

/// Percentile bootstrap interval of `metric` over resampled items.
pub fn bootstrap<T, S, M>(
    items: &[T],
    metric: M,
    config: BootstrapConfig,
    seed: u64,
) -> Result<BootstrapResult<S>, EvalError>
where
    T: Sync,
    S: Scalar,
    M: Fn(&[&T]) -> S + Sync,
{
    let mut results = bootstrap_many(items, |r| vec![metric(r)], config, seed)?;
    Ok(results.swap_remove(0))
}

/// Like [`bootstrap`] for a metric returning several values that share the
/// same resamples.
pub fn bootstrap_many<T, S, M>(
    items: &[T],
    metric: M,
    config: BootstrapConfig,
    seed: u64,
) -> Result<Vec<BootstrapResult<S>>, EvalError>
where
    T: Sync,
    S: Scalar,
    M: Fn(&[&T]) -> Vec<S> + Sync,
{
    config.check()?;
    if items.is_empty() {
        return Err(EvalError::EmptyBatch);
    }
    let per_resample: Vec<Vec<S>> = (0..config.n_boot)
        .into_par_iter()
        .map(|b| {
            let picked: Vec<&T> = resample_indices(items.len(), b, seed)
                .into_iter()
                .map(|i| &items[i])
                .collect();
            metric(&picked)
        })
        .collect();
    let width = per_resample.first().map_or(0, Vec::len);
    let q = (1.0 - config.level) / 2.0;
    Ok((0..width)
        .map(|k| {
            let replicates: Vec<S> = per_resample.iter().map(|v| v[k].clone()).collect();
            let mut sorted = replicates.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            BootstrapResult {
                interval: Interval {
                    low: percentile(&sorted, q),
                    high: percentile(&sorted, 1.0 - q),
                },
                replicates,
            }
        })
        .collect())
}

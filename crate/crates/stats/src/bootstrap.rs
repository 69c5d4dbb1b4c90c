//! Nonparametric bootstrap of the median.
//!
//! Values are sorted before resampling, so the result does not depend on
//! input order. Replicate `b` draws its `n` indices from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `b`; replicates are
//! independent of each other and of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::StatsError;

pub const DEFAULT_B: usize = 10_000;

/// Median of a non-empty slice; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn population_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Standard deviation of `b` resampled medians.
pub fn bootstrap_median_se(values: &[f64], b: usize, seed: u64) -> Result<f64, StatsError> {
    if values.is_empty() || b == 0 {
        return Err(StatsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut sample = vec![0.0; n];
    let medians: Vec<f64> = (0..b)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            for s in sample.iter_mut() {
                *s = sorted[rng.random_range(0..n)];
            }
            sample.sort_by(f64::total_cmp);
            median_sorted(&sample)
        })
        .collect();
    Ok(population_sd(&medians))
}

/// Exact bootstrap SE: enumerates all `n^n` equally likely resamples.
/// Only practical for `n <= 7`.
pub fn bootstrap_median_se_exact(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = values.len();
    assert!(n <= 7, "enumeration of {n}^{n} resamples is too large");
    let total = n.pow(n as u32);
    let mut sample = vec![0.0; n];
    let medians: Vec<f64> = (0..total)
        .map(|mut code| {
            for s in sample.iter_mut() {
                *s = values[code % n];
                code /= n;
            }
            median(&sample)
        })
        .collect();
    Ok(population_sd(&medians))
}

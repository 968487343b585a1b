//! Block bootstrap for statistics of summed per-block features.

use rand::Rng;
use rayon::prelude::*;

use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    /// Pulses (or time blocks) are grouped into at most this many blocks.
    pub blocks: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 200,
            blocks: 1000,
            seed: 0,
        }
    }
}

/// Standard deviation of `stat(sum of resampled block features)` over
/// bootstrap replicates. Replicates where `stat` returns `None` are skipped;
/// returns `None` if fewer than two succeed.
pub fn block_bootstrap_sd<F>(features: &[Vec<f64>], opts: &BootstrapOptions, stat: F) -> Option<f64>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let blocks = features.len();
    if blocks == 0 || opts.replicates < 2 {
        return None;
    }
    let width = features[0].len();
    let values: Vec<f64> = (0..opts.replicates)
        .into_par_iter()
        .filter_map(|rep| {
            let mut rng = substream(opts.seed, Domain::Bootstrap, rep as u64);
            let mut sum = vec![0.0; width];
            for _ in 0..blocks {
                let block = &features[rng.random_range(0..blocks)];
                sum.iter_mut().zip(block).for_each(|(s, x)| *s += x);
            }
            stat(&sum).filter(|v| v.is_finite())
        })
        .collect();
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(var.sqrt())
}

/// Sum of all feature vectors.
pub(crate) fn total(features: &[Vec<f64>]) -> Vec<f64> {
    let width = features.first().map_or(0, Vec::len);
    features.iter().fold(vec![0.0; width], |mut acc, f| {
        acc.iter_mut().zip(f).for_each(|(a, x)| *a += x);
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_of_mean_matches_standard_error() {
        // 1000 blocks of a deterministic +-1 pattern: mean 0, sd 1.
        let features: Vec<Vec<f64>> = (0..1000)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }, 1.0])
            .collect();
        let opts = BootstrapOptions {
            replicates: 2000,
            ..Default::default()
        };
        let sd = block_bootstrap_sd(&features, &opts, |s| Some(s[0] / s[1])).unwrap();
        let expected = 1.0 / 1000f64.sqrt();
        assert!((sd / expected - 1.0).abs() < 0.1, "{sd} vs {expected}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let features: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * i % 7) as f64]).collect();
        let opts = BootstrapOptions::default();
        let a = block_bootstrap_sd(&features, &opts, |s| Some(s[0]));
        let b = block_bootstrap_sd(&features, &opts, |s| Some(s[0]));
        assert_eq!(a, b);
        assert!(block_bootstrap_sd(&[], &opts, |s| Some(s[0])).is_none());
    }
}

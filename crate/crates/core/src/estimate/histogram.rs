use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{Click, ClickStream};

/// Which click pairs a [`TauHistogram`] counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairScope {
    /// Pairs sharing a pulse index.
    SamePulse,
    /// Every pair closer than `max_tau`.
    AllPairs,
    /// Only consecutive clicks (start-stop). Biased at high rates.
    StartStop,
}

/// Unordered click pairs binned by `|t_i - t_j|` on `[0, max_tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauHistogram {
    bin_width: f64,
    counts: Vec<u64>,
    scope: PairScope,
    num_pulses: Option<u64>,
    total_clicks: u64,
}

impl TauHistogram {
    pub fn from_counts(
        bin_width: f64,
        counts: Vec<u64>,
        scope: PairScope,
        num_pulses: Option<u64>,
        total_clicks: u64,
    ) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::domain("bin width must be positive"));
        }
        Ok(Self {
            bin_width,
            counts,
            scope,
            num_pulses,
            total_clicks,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn scope(&self) -> PairScope {
        self.scope
    }

    pub fn num_pulses(&self) -> Option<u64> {
        self.num_pulses
    }

    pub fn total_clicks(&self) -> u64 {
        self.total_clicks
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn max_tau(&self) -> f64 {
        self.bin_width * self.counts.len() as f64
    }

    /// No clicks went in. Still a valid histogram.
    pub fn is_empty(&self) -> bool {
        self.total_clicks == 0
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| i as f64 * self.bin_width)
            .collect()
    }

    /// Unordered pairs counted.
    pub fn pair_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Ordered pairs, i.e. the integral of D(tau) over both signs of tau.
    pub fn ordered_pair_count(&self) -> u64 {
        2 * self.pair_count()
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &TauHistogram) -> Result<()> {
        if other.bin_width != self.bin_width
            || other.counts.len() != self.counts.len()
            || other.scope != self.scope
        {
            return Err(Error::domain("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_clicks += other.total_clicks;
        self.num_pulses = match (self.num_pulses, other.num_pulses) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Ok(())
    }
}

const CLICKS_PER_TASK: usize = 1 << 14;

pub(crate) fn bin_count(bin_width: f64, max_tau: f64) -> Result<usize> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::domain("bin width must be positive"));
    }
    if !(max_tau.is_finite() && max_tau > 0.0) {
        return Err(Error::domain("max_tau must be positive"));
    }
    Ok(((max_tau / bin_width) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

/// Calls `visit(i, bin)` for every pair whose first click is `i`.
pub(crate) fn for_each_pair(
    clicks: &[Click],
    i: usize,
    bin_width: f64,
    nbins: usize,
    scope: PairScope,
    mut visit: impl FnMut(usize),
) {
    let max_tau = bin_width * nbins as f64;
    let first = clicks[i];
    for other in &clicks[i + 1..] {
        let tau = other.time - first.time;
        if tau >= max_tau {
            break;
        }
        if scope == PairScope::SamePulse && other.pulse != first.pulse {
            continue;
        }
        let bin = (tau / bin_width) as usize;
        if bin < nbins {
            visit(bin);
        }
        if scope == PairScope::StartStop {
            break;
        }
    }
}

/// Histogram of click-pair separations. With `SamePulse` the expected bin
/// content is `D(tau) * bin_width` for narrow bins.
pub fn tau_histogram(
    stream: &ClickStream,
    bin_width: f64,
    max_tau: f64,
    scope: PairScope,
) -> Result<TauHistogram> {
    let nbins = bin_count(bin_width, max_tau)?;
    if scope == PairScope::SamePulse && !stream.is_pulsed() {
        return Err(Error::domain("same-pulse pairing needs a pulsed stream"));
    }
    let clicks = &stream.clicks;
    let tasks = clicks.len().div_ceil(CLICKS_PER_TASK);
    let counts = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut counts = vec![0u64; nbins];
            let end = ((task + 1) * CLICKS_PER_TASK).min(clicks.len());
            for i in task * CLICKS_PER_TASK..end {
                for_each_pair(clicks, i, bin_width, nbins, scope, |b| counts[b] += 1);
            }
            counts
        })
        .reduce(
            || vec![0u64; nbins],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(TauHistogram {
        bin_width,
        counts,
        scope,
        num_pulses: stream.num_pulses(),
        total_clicks: clicks.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{RunInfo, StreamMetadata, DetectorModel};

    fn stream(clicks: &[(u64, f64)], pulses: u64) -> ClickStream {
        ClickStream {
            clicks: clicks
                .iter()
                .map(|&(p, t)| Click { pulse: Some(p), time: t })
                .collect(),
            metadata: StreamMetadata {
                seed: 0,
                state: None,
                mode: None,
                detector: DetectorModel::ideal(),
                run: RunInfo::Pulsed {
                    num_pulses: pulses,
                    period: 10.0,
                },
            },
        }
    }

    #[test]
    fn counts_unordered_pairs_by_scope() {
        let s = stream(&[(0, 4.0), (0, 4.5), (0, 6.2), (1, 14.1), (1, 14.3)], 2);
        let same = tau_histogram(&s, 1.0, 30.0, PairScope::SamePulse).unwrap();
        assert_eq!(same.pair_count(), 4);
        assert_eq!(same.ordered_pair_count(), 8);
        assert_eq!(same.counts()[0], 2);
        assert_eq!(same.counts()[1], 1);
        assert_eq!(same.counts()[2], 1);

        let all = tau_histogram(&s, 1.0, 30.0, PairScope::AllPairs).unwrap();
        assert_eq!(all.pair_count(), 10);
        let adjacent = tau_histogram(&s, 1.0, 30.0, PairScope::StartStop).unwrap();
        assert_eq!(adjacent.pair_count(), 4);
        let short = tau_histogram(&s, 1.0, 2.0, PairScope::AllPairs).unwrap();
        assert_eq!(short.len(), 2);
        assert_eq!(short.pair_count(), 3);
    }

    #[test]
    fn single_clicks_give_empty_same_pulse_histogram() {
        let s = stream(&[(0, 5.0), (1, 15.0), (2, 25.0)], 3);
        let h = tau_histogram(&s, 0.1, 5.0, PairScope::SamePulse).unwrap();
        assert_eq!(h.pair_count(), 0);
        assert!(!h.is_empty());
        let empty = tau_histogram(&stream(&[], 3), 0.1, 5.0, PairScope::SamePulse).unwrap();
        assert!(empty.is_empty());
        assert!(tau_histogram(&s, 0.0, 5.0, PairScope::SamePulse).is_err());
    }

    #[test]
    fn merge_adds_counts() {
        let s = stream(&[(0, 4.0), (0, 4.5)], 1);
        let mut a = tau_histogram(&s, 1.0, 3.0, PairScope::SamePulse).unwrap();
        let b = a.clone();
        a.merge(&b).unwrap();
        assert_eq!(a.counts(), &[2, 0, 0]);
        assert_eq!(a.num_pulses(), Some(2));
        let other = tau_histogram(&s, 0.5, 3.0, PairScope::SamePulse).unwrap();
        assert!(a.merge(&other).is_err());
    }
}

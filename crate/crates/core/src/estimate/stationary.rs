use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulate::{ClickStream, RunInfo};

use super::bootstrap::{block_bootstrap_sd, total, BootstrapOptions};
use super::histogram::{bin_count, for_each_pair, PairScope};
use super::Estimate;

/// Conditional click probability density after a click at `tau = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCurve {
    pub bin_width: f64,
    /// Bin centers.
    pub taus: Vec<f64>,
    /// Unordered pairs per bin.
    pub pair_counts: Vec<u64>,
    /// Per second. Tends to `baseline` at long lags.
    pub conditional_probability: Vec<f64>,
    /// `conditional_probability / baseline`.
    pub g2: Vec<f64>,
    /// Mean click rate, per second.
    pub baseline: f64,
    pub duration: f64,
    pub total_clicks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarySummary {
    /// Curve over baseline in the first bin.
    pub peak_ratio: Estimate,
    /// Mean of the normalized curve at lags beyond `long_tau`.
    pub long_tau_ratio: Estimate,
    pub long_tau: f64,
    /// Full width at half maximum of the excess `g2 - long_tau_ratio`, in
    /// seconds. `None` when the curve never drops below half the peak excess.
    pub fwhm: Option<Estimate>,
}

const CLICKS_PER_TASK: usize = 1 << 14;

fn stationary_run(stream: &ClickStream) -> Result<(f64, Option<f64>)> {
    match stream.metadata.run {
        RunInfo::Stationary {
            duration,
            bandwidth,
            ..
        } => Ok((duration, bandwidth)),
        RunInfo::Pulsed { .. } => Err(Error::domain("estimator needs a stationary stream")),
    }
}

/// Per-block features `[clicks, pair bins...]` over time blocks of
/// `block_len`.
fn time_block_features(
    stream: &ClickStream,
    bin_width: f64,
    nbins: usize,
    duration: f64,
    block_len: f64,
) -> Vec<Vec<f64>> {
    let nblocks = (duration / block_len).ceil().max(1.0) as usize;
    let block = |t: f64| ((t / block_len) as usize).min(nblocks - 1);
    let clicks = &stream.clicks;
    let tasks = clicks.len().div_ceil(CLICKS_PER_TASK);
    let partial: Vec<(usize, Vec<Vec<f64>>)> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let start = task * CLICKS_PER_TASK;
            let end = (start + CLICKS_PER_TASK).min(clicks.len());
            let lo = block(clicks[start].time);
            let hi = block(clicks[end - 1].time);
            let mut local = vec![vec![0.0; 1 + nbins]; hi - lo + 1];
            for i in start..end {
                let row = &mut local[block(clicks[i].time) - lo];
                row[0] += 1.0;
                for_each_pair(clicks, i, bin_width, nbins, PairScope::AllPairs, |b| {
                    row[1 + b] += 1.0
                });
            }
            (lo, local)
        })
        .collect();
    let mut features = vec![vec![0.0; 1 + nbins]; nblocks];
    for (lo, local) in partial {
        for (offset, row) in local.into_iter().enumerate() {
            features[lo + offset]
                .iter_mut()
                .zip(row)
                .for_each(|(a, x)| *a += x);
        }
    }
    features
}

/// `g2` per bin from summed features: pairs over the number expected for
/// uncorrelated clicks, `K^2 bin_width (T - tau) / T^2`.
fn normalized(t: &[f64], bin_width: f64, duration: f64) -> Vec<f64> {
    let k = t[0];
    t[1..]
        .iter()
        .enumerate()
        .map(|(b, c)| {
            let tau = (b as f64 + 0.5) * bin_width;
            c * duration * duration / (k * k * bin_width * (duration - tau))
        })
        .collect()
}

/// Estimates the conditional probability density of a click at lag `tau`
/// given a click at 0 from all click pairs (not start-stop pairs). The
/// finite-record factor `T / (T - tau)` is divided out.
pub fn stationary_conditional_probability(
    stream: &ClickStream,
    bin_width: f64,
    max_tau: f64,
) -> Result<StationaryCurve> {
    let (duration, _) = stationary_run(stream)?;
    let nbins = bin_count(bin_width, max_tau)?;
    if stream.clicks.is_empty() {
        return Err(Error::estimation("no clicks in stream"));
    }
    if max_tau >= duration {
        return Err(Error::domain("max_tau must be shorter than the record"));
    }
    let features = time_block_features(stream, bin_width, nbins, duration, duration);
    Ok(curve_from_totals(&total(&features), bin_width, duration))
}

fn curve_from_totals(t: &[f64], bin_width: f64, duration: f64) -> StationaryCurve {
    let g2 = normalized(t, bin_width, duration);
    let baseline = t[0] / duration;
    StationaryCurve {
        bin_width,
        taus: (0..g2.len()).map(|b| (b as f64 + 0.5) * bin_width).collect(),
        pair_counts: t[1..].iter().map(|&c| c as u64).collect(),
        conditional_probability: g2.iter().map(|g| g * baseline).collect(),
        g2,
        baseline,
        duration,
        total_clicks: t[0] as u64,
    }
}

fn long_tau_mean(g2: &[f64], first_bin: usize) -> f64 {
    let tail = &g2[first_bin..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn fwhm(g2: &[f64], bin_width: f64, baseline: f64) -> Option<f64> {
    let half = 0.5 * (g2[0] - baseline);
    if !(half > 0.0) {
        return None;
    }
    let b = g2.iter().position(|g| g - baseline < half)?;
    if b == 0 {
        return None;
    }
    let (e0, e1) = (g2[b - 1] - baseline, g2[b] - baseline);
    let frac = (e0 - half) / (e0 - e1);
    Some(2.0 * (b as f64 - 0.5 + frac) * bin_width)
}

/// The curve plus its peak, long-lag level and width. Uncertainties come
/// from a bootstrap over time blocks of `10 / bandwidth` (or `T / blocks`
/// when the bandwidth is unknown). `long_tau` defaults to `2 / bandwidth`,
/// or half of `max_tau`.
pub fn summarize_stationary(
    stream: &ClickStream,
    bin_width: f64,
    max_tau: f64,
    long_tau: Option<f64>,
    opts: &BootstrapOptions,
) -> Result<(StationaryCurve, StationarySummary)> {
    let (duration, bandwidth) = stationary_run(stream)?;
    let nbins = bin_count(bin_width, max_tau)?;
    if stream.clicks.is_empty() {
        return Err(Error::estimation("no clicks in stream"));
    }
    if max_tau >= duration {
        return Err(Error::domain("max_tau must be shorter than the record"));
    }
    let long_tau = long_tau.unwrap_or(match bandwidth {
        Some(bw) => 2.0 / bw,
        None => 0.5 * max_tau,
    });
    let first_long = (long_tau / bin_width).ceil() as usize;
    if first_long >= nbins {
        return Err(Error::domain("long_tau must lie inside the histogram"));
    }
    let shortest = duration / opts.blocks.max(1) as f64;
    let block_len = bandwidth.map_or(shortest, |bw| (10.0 / bw).max(shortest));
    let features = time_block_features(stream, bin_width, nbins, duration, block_len);
    let totals = total(&features);
    let curve = curve_from_totals(&totals, bin_width, duration);

    let sd = |stat: &(dyn Fn(&[f64]) -> f64 + Sync)| {
        block_bootstrap_sd(&features, opts, |t| Some(stat(t)).filter(|v| v.is_finite()))
    };
    let with_sd = |value: f64, s: Option<f64>| Estimate::new(value, s.unwrap_or(f64::INFINITY));

    let peak = |t: &[f64]| normalized(t, bin_width, duration)[0];
    let long = |t: &[f64]| long_tau_mean(&normalized(t, bin_width, duration), first_long);
    let width = |t: &[f64]| {
        let g2 = normalized(t, bin_width, duration);
        fwhm(&g2, bin_width, long_tau_mean(&g2, first_long)).unwrap_or(f64::NAN)
    };
    let long_value = long(&totals);
    let summary = StationarySummary {
        peak_ratio: with_sd(curve.g2[0], sd(&peak)),
        long_tau_ratio: with_sd(long_value, sd(&long)),
        long_tau,
        fwhm: fwhm(&curve.g2, bin_width, long_value).map(|w| with_sd(w, sd(&width))),
    };
    Ok((curve, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{
        simulate_stationary_poisson, simulate_stationary_thermal, DetectorModel, Lineshape,
        StationaryThermalConfig,
    };

    #[test]
    fn poisson_curve_is_flat() {
        let stream =
            simulate_stationary_poisson(2e5, 1.0, &DetectorModel::ideal(), 5).unwrap();
        let curve = stationary_conditional_probability(&stream, 1e-7, 5e-6).unwrap();
        assert!((curve.baseline / 2e5 - 1.0).abs() < 0.01);
        let mean = curve.g2.iter().sum::<f64>() / curve.g2.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn chaotic_light_shows_bunching_peak() {
        let cfg = StationaryThermalConfig::new(1e6, 1e6, 0.2, None, Lineshape::Gaussian).unwrap();
        let stream = simulate_stationary_thermal(&cfg, &DetectorModel::ideal(), 9);
        let (curve, s) =
            summarize_stationary(&stream, 2e-8, 3e-6, None, &BootstrapOptions::default()).unwrap();
        assert!(s.peak_ratio.z_score(2.0) < 4.0, "{:?}", s.peak_ratio);
        assert!(s.long_tau_ratio.z_score(1.0) < 4.0, "{:?}", s.long_tau_ratio);
        let w = s.fwhm.unwrap().value;
        // FWHM of |g1|^2 for a Gaussian spectrum of FWHM 1 MHz.
        let expected = 2.0 * 2f64.sqrt() * std::f64::consts::LN_2 / std::f64::consts::PI / 1e6;
        assert!((w / expected - 1.0).abs() < 0.1, "{w} vs {expected}");
        assert_eq!(curve.taus.len(), 150);
    }

    #[test]
    fn rejects_wrong_streams() {
        let stream = simulate_stationary_poisson(0.0, 1.0, &DetectorModel::ideal(), 5).unwrap();
        assert!(stationary_conditional_probability(&stream, 1e-7, 1e-6).is_err());
    }
}

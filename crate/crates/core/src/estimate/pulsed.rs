use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::modes::{ModeKind, TemporalMode};
use crate::simulate::{ClickStream, RunInfo};

use super::bootstrap::{block_bootstrap_sd, total, BootstrapOptions};
use super::d0::{fit_gaussian_counts, gaussian_bin_shape, D0Functional};
use super::histogram::{for_each_pair, PairScope, TauHistogram};
use super::Estimate;

/// Number of click records, the estimate of I_p(N).
pub fn total_counts(stream: &ClickStream) -> u64 {
    stream.clicks.len() as u64
}

// Feature layout of a pulse block.
const PULSES: usize = 0;
const CLICKS: usize = 1;
const FACTORIAL: usize = 2;
const BINS: usize = 3;

const CLICKS_PER_TASK: usize = 1 << 14;

/// Per-block sufficient statistics of a pulsed stream: pulse count, click
/// count, `sum k(k-1)` over pulses and the same-pulse pair histogram.
/// Every pulsed estimator is a function of their sums, which makes the
/// bootstrap cheap.
#[derive(Debug, Clone)]
pub struct PulsedSample {
    num_pulses: u64,
    bin_width: f64,
    features: Vec<Vec<f64>>,
    totals: Vec<f64>,
    opts: BootstrapOptions,
}

fn block_layout(num_pulses: u64, max_blocks: usize) -> (u64, usize) {
    let blocks = (max_blocks.max(1) as u64).min(num_pulses.max(1));
    let per_block = num_pulses.div_ceil(blocks).max(1);
    (per_block, num_pulses.div_ceil(per_block).max(1) as usize)
}

fn pulsed_run(stream: &ClickStream) -> Result<(u64, f64)> {
    match stream.metadata.run {
        RunInfo::Pulsed { num_pulses, period } if num_pulses > 0 => Ok((num_pulses, period)),
        RunInfo::Pulsed { .. } => Err(Error::domain("stream has no pulses")),
        RunInfo::Stationary { .. } => Err(Error::domain("estimator needs a pulsed stream")),
    }
}

fn pulse_of(stream: &ClickStream, i: usize) -> Result<u64> {
    stream.clicks[i]
        .pulse
        .ok_or_else(|| Error::domain(format!("click {i} has no pulse index")))
}

impl PulsedSample {
    /// Collects block features. `binning` is `(bin_width, bins)` of the
    /// same-pulse histogram, or `None` when only counts are needed.
    pub fn from_stream(
        stream: &ClickStream,
        binning: Option<(f64, usize)>,
        opts: BootstrapOptions,
    ) -> Result<Self> {
        let (num_pulses, _) = pulsed_run(stream)?;
        let (bin_width, nbins) = binning.unwrap_or((1.0, 0));
        let (per_block, nblocks) = block_layout(num_pulses, opts.blocks);
        let width = BINS + nbins;
        let mut features = vec![vec![0.0; width]; nblocks];
        for (b, f) in features.iter_mut().enumerate() {
            let start = b as u64 * per_block;
            f[PULSES] = (num_pulses - start).min(per_block) as f64;
        }

        let mut pulses = Vec::with_capacity(stream.clicks.len());
        for i in 0..stream.clicks.len() {
            let p = pulse_of(stream, i)?;
            if p >= num_pulses {
                return Err(Error::domain(format!(
                    "click {i}: pulse index {p} >= number of pulses {num_pulses}"
                )));
            }
            pulses.push(p);
        }
        pulses.sort_unstable();
        for run in pulses.chunk_by(|a, b| a == b) {
            let k = run.len() as f64;
            let f = &mut features[(run[0] / per_block) as usize];
            f[CLICKS] += k;
            f[FACTORIAL] += k * (k - 1.0);
        }

        if nbins > 0 {
            let clicks = &stream.clicks;
            let tasks = clicks.len().div_ceil(CLICKS_PER_TASK);
            let partial: Vec<(usize, Vec<Vec<f64>>)> = (0..tasks)
                .into_par_iter()
                .map(|task| {
                    let range = task * CLICKS_PER_TASK..((task + 1) * CLICKS_PER_TASK).min(clicks.len());
                    let block = |i: usize| (clicks[i].pulse.unwrap_or(0) / per_block) as usize;
                    let lo = range.clone().map(block).min().unwrap_or(0);
                    let hi = range.clone().map(block).max().unwrap_or(0);
                    let mut local = vec![vec![0.0; nbins]; hi - lo + 1];
                    for i in range {
                        let row = &mut local[block(i) - lo];
                        for_each_pair(clicks, i, bin_width, nbins, PairScope::SamePulse, |bin| {
                            row[bin] += 1.0
                        });
                    }
                    (lo, local)
                })
                .collect();
            for (lo, local) in partial {
                for (offset, row) in local.into_iter().enumerate() {
                    let f = &mut features[lo + offset][BINS..];
                    f.iter_mut().zip(row).for_each(|(a, x)| *a += x);
                }
            }
        }

        let totals = total(&features);
        Ok(Self {
            num_pulses,
            bin_width,
            features,
            totals,
            opts,
        })
    }

    /// Features for the binning of `hist`, which must be the same-pulse
    /// histogram of `stream`.
    pub fn for_histogram(
        stream: &ClickStream,
        hist: &TauHistogram,
        opts: BootstrapOptions,
    ) -> Result<Self> {
        if hist.scope() != PairScope::SamePulse {
            return Err(Error::domain("pulsed estimators need a same-pulse histogram"));
        }
        let sample = Self::from_stream(stream, Some((hist.bin_width(), hist.len())), opts)?;
        let matches = sample
            .pair_counts()
            .iter()
            .zip(hist.counts())
            .all(|(a, &b)| *a == b as f64);
        if !matches {
            return Err(Error::domain("histogram was not built from this stream"));
        }
        Ok(sample)
    }

    pub fn num_pulses(&self) -> u64 {
        self.num_pulses
    }

    pub fn clicks(&self) -> f64 {
        self.totals[CLICKS]
    }

    /// Same-pulse pair histogram.
    pub fn pair_counts(&self) -> &[f64] {
        &self.totals[BINS..]
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    fn bootstrap(&self, stat: impl Fn(&[f64]) -> Option<f64> + Sync) -> Option<f64> {
        block_bootstrap_sd(&self.features, &self.opts, stat)
    }

    fn require_clicks(&self) -> Result<f64> {
        match self.clicks() {
            c if c > 0.0 => Ok(c),
            _ => Err(Error::estimation("no clicks in stream")),
        }
    }

    /// I_p(N) with its bootstrap spread.
    pub fn intensity(&self) -> Estimate {
        let c = self.clicks();
        let sd = self.bootstrap(|t| Some(t[CLICKS]));
        finish(c, sd, 1.0, c == 0.0)
    }

    fn d0_functional(&self, mode_hint: Option<&TemporalMode>) -> Result<D0Functional> {
        let nbins = self.pair_counts().len();
        match mode_hint {
            Some(mode) => D0Functional::from_shape(&super::d0::mode_bin_shape(
                mode,
                self.bin_width,
                nbins,
            )),
            None => D0Functional::central_bin(self.bin_width, nbins),
        }
    }

    /// `stat(D(0), totals)` with a bootstrap uncertainty.
    fn via_d0(
        &self,
        functional: &D0Functional,
        stat: impl Fn(f64, &[f64]) -> f64 + Sync,
    ) -> Estimate {
        let d0 = functional.estimate(self.pair_counts());
        let value = stat(d0.value, &self.totals);
        let resolution = stat(d0.uncertainty, &self.totals);
        let sd = self.bootstrap(|t| {
            let v = stat(functional.apply(&t[BINS..]), t);
            v.is_finite().then_some(v)
        });
        finish(value, sd, resolution, d0.zero_counts)
    }

    /// D(0) per second.
    pub fn d0(&self, mode_hint: Option<&TemporalMode>) -> Result<Estimate> {
        let f = self.d0_functional(mode_hint)?;
        Ok(self.via_d0(&f, |d0, _| d0))
    }

    /// `D(0) / I_p^2`, per second.
    pub fn g2p(&self, mode_hint: Option<&TemporalMode>) -> Result<Estimate> {
        self.require_clicks()?;
        let f = self.d0_functional(mode_hint)?;
        Ok(self.via_d0(&f, |d0, t| d0 / (t[CLICKS] * t[CLICKS])))
    }

    /// `N D(0) / (I_p^2 eta(0))` for a known mode. `num_pulses` is the N of
    /// the formula; resampled blocks scale it with their pulse count.
    pub fn g2q_general(&self, num_pulses: u64, mode: &TemporalMode) -> Result<Estimate> {
        self.g2q_eta(num_pulses, Some(mode), mode.eta_numeric(0.0))
    }

    /// `N D(0) / (I_p^2 eta0)` with D(0) from the shape of `d0_shape`, or
    /// from the central bins when `None`.
    pub fn g2q_eta(
        &self,
        num_pulses: u64,
        d0_shape: Option<&TemporalMode>,
        eta0: f64,
    ) -> Result<Estimate> {
        self.require_clicks()?;
        let f = self.d0_functional(d0_shape)?;
        let scale = num_pulses as f64 / self.num_pulses as f64;
        Ok(self.via_d0(&f, |d0, t| {
            scale * t[PULSES] * d0 / (t[CLICKS] * t[CLICKS] * eta0)
        }))
    }

    /// `sqrt(2 pi) width N D(0) / I_p^2` for a Gaussian mode. Without a
    /// width, the width is fitted to the histogram (and refitted in every
    /// bootstrap replicate). Returns the estimate and the width used.
    pub fn g2q_gaussian(&self, num_pulses: u64, width: Option<f64>) -> Result<(Estimate, f64)> {
        self.require_clicks()?;
        let scale = num_pulses as f64 / self.num_pulses as f64;
        let nbins = self.pair_counts().len();
        match width {
            Some(width) => {
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::domain("pulse width must be positive"));
                }
                let f = D0Functional::from_shape(&gaussian_bin_shape(width, self.bin_width, nbins))?;
                let k = (2.0 * PI).sqrt() * width * scale;
                let est = self.via_d0(&f, |d0, t| k * t[PULSES] * d0 / (t[CLICKS] * t[CLICKS]));
                Ok((est, width))
            }
            None => {
                let fit = fit_gaussian_counts(self.pair_counts(), self.bin_width).map_err(|e| {
                    Error::estimation(format!(
                        "pulse width unknown and could not be fitted ({e}); \
                         supply the mode and use the general recovery"
                    ))
                })?;
                let g = |amplitude: f64, width: f64, t: &[f64]| {
                    (2.0 * PI).sqrt() * width * scale * t[PULSES] * amplitude
                        / (t[CLICKS] * t[CLICKS])
                };
                let value = g(fit.amplitude, fit.width, &self.totals);
                let bw = self.bin_width;
                let sd = self.bootstrap(|t| {
                    fit_gaussian_counts(&t[BINS..], bw)
                        .ok()
                        .map(|f| g(f.amplitude, f.width, t))
                });
                let resolution = g(fit.amplitude_sd, fit.width, &self.totals);
                Ok((finish(value, sd, resolution, false), fit.width))
            }
        }
    }

    /// `N sum k(k-1) / (sum k)^2` over per-pulse click counts.
    pub fn g2q_pn(&self) -> Result<Estimate> {
        let c = self.require_clicks()?;
        let stat = |t: &[f64]| t[PULSES] * t[FACTORIAL] / (t[CLICKS] * t[CLICKS]);
        let value = stat(&self.totals);
        // One two-click pulse.
        let resolution = 2.0 * self.totals[PULSES] / (c * c);
        let sd = self.bootstrap(|t| {
            let v = stat(t);
            v.is_finite().then_some(v)
        });
        Ok(finish(value, sd, resolution, self.totals[FACTORIAL] == 0.0))
    }
}

/// Falls back to the one-event `resolution` when the sample holds no events
/// or the bootstrap has no spread.
fn finish(value: f64, sd: Option<f64>, resolution: f64, empty: bool) -> Estimate {
    if empty {
        return Estimate {
            value: 0.0,
            uncertainty: resolution.abs(),
            resolution_limited: true,
        };
    }
    match sd {
        Some(sd) if sd > 0.0 => Estimate::new(value, sd),
        _ => Estimate {
            value,
            uncertainty: resolution.abs(),
            resolution_limited: true,
        },
    }
}

fn default_opts(stream: &ClickStream) -> BootstrapOptions {
    BootstrapOptions {
        seed: stream.metadata.seed,
        ..Default::default()
    }
}

/// Pulsed `g2_p = D(0) / I_p^2`, per second. With a mode hint D(0) comes from
/// a shape fit, otherwise from the bias-corrected central bin.
pub fn g2p(
    stream: &ClickStream,
    hist: &TauHistogram,
    mode_hint: Option<&TemporalMode>,
) -> Result<Estimate> {
    PulsedSample::for_histogram(stream, hist, default_opts(stream))?.g2p(mode_hint)
}

/// State g2 for Gaussian pulses of intensity s.d. `width / sqrt 2`
/// (`width` is the s.d. of D(tau)). `None` fits the width to `hist`.
pub fn recover_g2q_gaussian(
    stream: &ClickStream,
    hist: &TauHistogram,
    num_pulses: u64,
    width: Option<f64>,
) -> Result<Estimate> {
    PulsedSample::for_histogram(stream, hist, default_opts(stream))?
        .g2q_gaussian(num_pulses, width)
        .map(|(e, _)| e)
}

/// State g2 for any known mode.
pub fn recover_g2q_general(
    stream: &ClickStream,
    hist: &TauHistogram,
    num_pulses: u64,
    mode: &TemporalMode,
) -> Result<Estimate> {
    PulsedSample::for_histogram(stream, hist, default_opts(stream))?.g2q_general(num_pulses, mode)
}

/// State g2 from the distribution of clicks per pulse. Loss leaves it
/// unchanged, so no efficiency correction is needed.
pub fn pn_histogram_g2q(stream: &ClickStream) -> Result<Estimate> {
    PulsedSample::from_stream(stream, None, default_opts(stream))?.g2q_pn()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidePeakOptions {
    /// Half-width of each coincidence window; at most half the period.
    /// Defaults to half the period.
    pub window: Option<f64>,
    /// Number of side peaks averaged for the normalization.
    pub side_peaks: usize,
    pub bootstrap: BootstrapOptions,
}

impl Default for SidePeakOptions {
    fn default() -> Self {
        Self {
            window: None,
            side_peaks: 3,
            bootstrap: BootstrapOptions::default(),
        }
    }
}

/// Central coincidence peak normalized by the mean of the side peaks at
/// `k * period`, `k = 1..K`. Equals g2_q when pulses are independent.
pub fn g2_sidepeak(stream: &ClickStream, window: f64) -> Result<Estimate> {
    g2_sidepeak_with(
        stream,
        &SidePeakOptions {
            window: Some(window),
            bootstrap: default_opts(stream),
            ..Default::default()
        },
    )
}

pub fn g2_sidepeak_with(stream: &ClickStream, opts: &SidePeakOptions) -> Result<Estimate> {
    let (num_pulses, period) = pulsed_run(stream)?;
    let k_max = opts.side_peaks;
    if k_max == 0 {
        return Err(Error::domain("need at least one side peak"));
    }
    if num_pulses < k_max as u64 + 1 {
        return Err(Error::estimation(format!(
            "{num_pulses} pulses are too few for {k_max} side peaks"
        )));
    }
    let window = opts.window.unwrap_or(0.5 * period);
    if !(window > 0.0 && window <= 0.5 * period * (1.0 + 1e-12)) {
        return Err(Error::domain("window must lie in (0, period/2]"));
    }
    if stream.clicks.is_empty() {
        return Err(Error::estimation("no clicks in stream"));
    }

    let (per_block, nblocks) = block_layout(num_pulses, opts.bootstrap.blocks);
    let width = 2 + k_max;
    let reach = k_max as f64 * period + window;
    let clicks = &stream.clicks;
    let tasks = clicks.len().div_ceil(CLICKS_PER_TASK);
    let mut features = (0..tasks)
        .into_par_iter()
        .map(|task| -> Result<Vec<Vec<f64>>> {
            let mut f = vec![vec![0.0; width]; nblocks];
            let end = ((task + 1) * CLICKS_PER_TASK).min(clicks.len());
            for i in task * CLICKS_PER_TASK..end {
                let row = &mut f[(pulse_of(stream, i)? / per_block) as usize];
                let t0 = clicks[i].time;
                for other in &clicks[i + 1..] {
                    let tau = other.time - t0;
                    if tau >= reach {
                        break;
                    }
                    let k = (tau / period).round();
                    if (tau - k * period).abs() < window {
                        row[1 + k as usize] += 1.0;
                    }
                }
            }
            Ok(f)
        })
        .try_reduce(
            || vec![vec![0.0; width]; nblocks],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                }
                Ok(a)
            },
        )?;
    for (b, f) in features.iter_mut().enumerate() {
        f[0] = (num_pulses - b as u64 * per_block).min(per_block) as f64;
    }

    let side = move |t: &[f64]| {
        (1..=k_max)
            .map(|k| t[1 + k] / (t[0] - k as f64))
            .sum::<f64>()
            / k_max as f64
    };
    let stat = move |t: &[f64]| (2.0 * t[1] / t[0]) / side(t);
    let totals = total(&features);
    if side(&totals) == 0.0 {
        return Err(Error::estimation("side peaks are empty"));
    }
    let value = stat(&totals);
    let resolution = (2.0 / totals[0]) / side(&totals);
    let sd = block_bootstrap_sd(&features, &opts.bootstrap, |t| {
        let v = stat(t);
        v.is_finite().then_some(v)
    });
    Ok(finish(value, sd, resolution, totals[1] == 0.0))
}

/// Whether `mode` is a plain Gaussian, whose D(tau) s.d. is its width.
pub(crate) fn gaussian_width(mode: &TemporalMode) -> Option<f64> {
    match mode.kind() {
        ModeKind::Gaussian { width, .. } => Some(*width),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::tau_histogram;
    use crate::simulate::{simulate_pulse_train, DetectorModel, PulseTrainConfig};
    use crate::states::QuantumState;

    fn run(state: QuantumState, s: f64, n: u64, width: f64) -> (ClickStream, TauHistogram) {
        let mode = TemporalMode::gaussian(width, 0.0).unwrap();
        let train = PulseTrainConfig::new(n, 12.5 * width, mode).unwrap();
        let stream =
            simulate_pulse_train(&state, &DetectorModel::new(s).unwrap(), &train, 7);
        let hist = tau_histogram(&stream, width / 20.0, 8.0 * width, PairScope::SamePulse).unwrap();
        (stream, hist)
    }

    #[test]
    fn recovers_thermal_and_coherent() {
        for (state, target) in [
            (QuantumState::thermal(0.5).unwrap(), 2.0),
            (QuantumState::coherent(1.0).unwrap(), 1.0),
        ] {
            let (stream, hist) = run(state, 0.5, 200_000, 1e-9);
            let mode = TemporalMode::gaussian(1e-9, 0.0).unwrap();
            let gauss = recover_g2q_gaussian(&stream, &hist, 200_000, Some(1e-9)).unwrap();
            let general = recover_g2q_general(&stream, &hist, 200_000, &mode).unwrap();
            let fitted = recover_g2q_gaussian(&stream, &hist, 200_000, None).unwrap();
            let pn = pn_histogram_g2q(&stream).unwrap();
            for e in [gauss, general, fitted, pn] {
                assert!(e.z_score(target) < 4.0, "{e:?} vs {target}");
                assert!(e.uncertainty > 0.0 && e.uncertainty < 0.1);
            }
            assert!((gauss.value / general.value - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn g2p_is_not_g2q() {
        let (stream, hist) = run(QuantumState::coherent(1.0).unwrap(), 1.0, 10_000, 1.0);
        let mode = TemporalMode::gaussian(1.0, 0.0).unwrap();
        let e = g2p(&stream, &hist, Some(&mode)).unwrap();
        let expected = 1.0 / ((2.0 * PI).sqrt() * 1e4);
        assert!(e.z_score(expected) < 3.5, "{e:?} vs {expected}");
    }

    #[test]
    fn single_photons_have_no_pairs() {
        let (stream, hist) = run(QuantumState::fock(1), 0.4, 50_000, 1.0);
        assert_eq!(hist.pair_count(), 0);
        let pn = pn_histogram_g2q(&stream).unwrap();
        assert_eq!(pn.value, 0.0);
        assert!(pn.resolution_limited && pn.uncertainty > 0.0 && pn.uncertainty < 1e-3);
        let e = recover_g2q_gaussian(&stream, &hist, 50_000, Some(1.0)).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.uncertainty > 0.0 && e.uncertainty < 1e-3);
        assert!(recover_g2q_gaussian(&stream, &hist, 50_000, None).is_err());
        let side = g2_sidepeak(&stream, 6.25).unwrap();
        assert_eq!(side.value, 0.0);
    }

    #[test]
    fn side_peaks_normalize_to_state_g2() {
        let (stream, _) = run(QuantumState::thermal(1.0).unwrap(), 0.5, 200_000, 1.0);
        let e = g2_sidepeak(&stream, 6.25).unwrap();
        assert!(e.z_score(2.0) < 4.0, "{e:?}");
        assert!(g2_sidepeak(&stream, 7.0).is_err());
    }

    #[test]
    fn errors_without_clicks() {
        let (stream, hist) = run(QuantumState::coherent(1.0).unwrap(), 0.0, 100, 1.0);
        assert_eq!(total_counts(&stream), 0);
        assert!(g2p(&stream, &hist, None).is_err());
        assert!(pn_histogram_g2q(&stream).is_err());
    }

    #[test]
    fn rejects_foreign_histogram() {
        let (stream, _) = run(QuantumState::thermal(1.0).unwrap(), 1.0, 1000, 1.0);
        let (_, other) = run(QuantumState::thermal(2.0).unwrap(), 1.0, 1000, 1.0);
        assert!(g2p(&stream, &other, None).is_err());
    }
}

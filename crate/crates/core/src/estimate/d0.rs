//! Extraction of the pair density at zero separation, D(0).
//!
//! D(0) is a density at a point, so the preferred estimator fits the known
//! pulse-shape profile to the whole same-pulse histogram: with the shape
//! fixed, the Poisson maximum-likelihood amplitude is
//! `sum(counts) / sum(expected counts per unit D(0))` over the bins the shape
//! covers. Without a shape, the first two bins are combined to cancel the
//! leading `O(bin_width^2)` curvature bias of a single bin.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::modes::TemporalMode;
use crate::quadrature::simpson;

use super::histogram::TauHistogram;

/// Fewest pairs for which a width fit is attempted.
const MIN_FIT_PAIRS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum D0Method {
    ShapeFit,
    CentralBin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D0Estimate {
    /// Per second, same units as D(tau).
    pub value: f64,
    /// One sigma, from Poisson statistics of the bins used.
    pub uncertainty: f64,
    pub method: D0Method,
    /// No pairs in the bins used: `value` is 0 and only bounded from above
    /// by `uncertainty`.
    pub zero_counts: bool,
}

/// D(0) as a fixed linear combination of bin counts.
#[derive(Debug, Clone)]
pub(crate) struct D0Functional {
    weights: Vec<f64>,
    method: D0Method,
}

impl D0Functional {
    /// `shape[b]` is the expected count in bin `b` per unit D(0).
    pub fn from_shape(shape: &[f64]) -> Result<Self> {
        let peak = shape.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0) {
            return Err(Error::estimation("pulse shape does not overlap the histogram"));
        }
        let used: Vec<bool> = shape.iter().map(|&w| w > 1e-12 * peak).collect();
        let total: f64 = shape.iter().zip(&used).filter(|(_, &u)| u).map(|(w, _)| w).sum();
        let weights = used
            .iter()
            .map(|&u| if u { 1.0 / total } else { 0.0 })
            .collect();
        Ok(Self {
            weights,
            method: D0Method::ShapeFit,
        })
    }

    /// Bin averages of `D0 + c tau^2` over bins 0 and 1 are
    /// `D0 + c w^2/3` and `D0 + 7 c w^2/3`, so `D0 = (7 d_0 - d_1) / 6`.
    pub fn central_bin(bin_width: f64, nbins: usize) -> Result<Self> {
        if nbins < 2 {
            return Err(Error::estimation("central-bin estimate needs at least two bins"));
        }
        let mut weights = vec![0.0; nbins];
        weights[0] = 7.0 / (6.0 * bin_width);
        weights[1] = -1.0 / (6.0 * bin_width);
        Ok(Self {
            weights,
            method: D0Method::CentralBin,
        })
    }

    pub fn for_histogram(hist: &TauHistogram, mode_hint: Option<&TemporalMode>) -> Result<Self> {
        match mode_hint {
            Some(mode) => Self::from_shape(&mode_bin_shape(mode, hist.bin_width(), hist.len())),
            None => Self::central_bin(hist.bin_width(), hist.len()),
        }
    }

    pub fn apply(&self, counts: &[f64]) -> f64 {
        self.weights.iter().zip(counts).map(|(w, c)| w * c).sum()
    }

    pub fn estimate(&self, counts: &[f64]) -> D0Estimate {
        let used: f64 = self
            .weights
            .iter()
            .zip(counts)
            .filter(|(w, _)| **w != 0.0)
            .map(|(_, c)| c)
            .sum();
        let value = self.apply(counts);
        let variance: f64 = self.weights.iter().zip(counts).map(|(w, c)| w * w * c).sum();
        if used == 0.0 {
            // One pair in the most sensitive bin.
            let resolution = self.weights.iter().copied().fold(0.0, f64::max);
            return D0Estimate {
                value: 0.0,
                uncertainty: resolution,
                method: self.method,
                zero_counts: true,
            };
        }
        D0Estimate {
            value,
            uncertainty: variance.sqrt(),
            method: self.method,
            zero_counts: false,
        }
    }
}

/// `integral over bin b of eta(tau) / eta(0)`, by Simpson within each bin.
pub fn mode_bin_shape(mode: &TemporalMode, bin_width: f64, nbins: usize) -> Vec<f64> {
    let eta0 = mode.eta_numeric(0.0);
    const SUB: usize = 4;
    let h = bin_width / SUB as f64;
    let nodes: Vec<f64> = (0..=nbins * SUB)
        .map(|k| mode.eta_numeric(k as f64 * h) / eta0)
        .collect();
    (0..nbins)
        .map(|b| {
            let f = &nodes[b * SUB..=(b + 1) * SUB];
            h / 3.0 * (f[0] + 4.0 * f[1] + 2.0 * f[2] + 4.0 * f[3] + f[4])
        })
        .collect()
}

/// `integral over bin b of exp(-tau^2 / 2 width^2)` in closed form.
pub fn gaussian_bin_shape(width: f64, bin_width: f64, nbins: usize) -> Vec<f64> {
    let scale = width * (PI / 2.0).sqrt();
    let z = |tau: f64| erfc(tau / (SQRT_2 * width));
    (0..nbins)
        .map(|b| scale * (z(b as f64 * bin_width) - z((b + 1) as f64 * bin_width)))
        .collect()
}

/// D(0) from a same-pulse histogram: a shape fit when `mode_hint` is given,
/// otherwise the bias-corrected central bin.
///
/// The uncertainty treats bins as independent Poisson counts. Pairs from one
/// pulse are correlated, so for bunched light it is too small; use
/// [`PulsedSample::d0`](super::PulsedSample::d0) for a per-pulse bootstrap.
pub fn estimate_d0(hist: &TauHistogram, mode_hint: Option<&TemporalMode>) -> Result<D0Estimate> {
    let counts: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    Ok(D0Functional::for_histogram(hist, mode_hint)?.estimate(&counts))
}

/// Gaussian D(tau) fitted with free amplitude and width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    /// D(0), per second.
    pub amplitude: f64,
    pub amplitude_sd: f64,
    /// S.d. of D(tau), equal to the amplitude s.d. of a Gaussian mode.
    pub width: f64,
    pub width_sd: f64,
}

fn profile_log_likelihood(counts: &[f64], bin_width: f64, width: f64) -> f64 {
    let shape = gaussian_bin_shape(width, bin_width, counts.len());
    let total_shape: f64 = shape.iter().sum();
    let total: f64 = counts.iter().sum();
    counts
        .iter()
        .zip(&shape)
        .filter(|(c, _)| **c > 0.0)
        .map(|(c, w)| c * w.max(1e-300).ln())
        .sum::<f64>()
        - total * total_shape.ln()
}

/// Poisson maximum-likelihood fit of `A exp(-tau^2 / 2 w^2)` to bin counts.
pub fn fit_gaussian_counts(counts: &[f64], bin_width: f64) -> Result<GaussianFit> {
    let total: f64 = counts.iter().sum();
    if total < MIN_FIT_PAIRS {
        return Err(Error::estimation(format!(
            "too few pairs ({total}) to fit a pulse width"
        )));
    }
    let second: f64 = counts
        .iter()
        .enumerate()
        .map(|(b, c)| c * ((b as f64 + 0.5) * bin_width).powi(2))
        .sum();
    let guess = (second / total).sqrt().max(bin_width);
    let (mut lo, mut hi) = ((guess / 4.0).ln(), (guess * 4.0).ln());
    let (lo0, hi0) = (lo, hi);
    let f = |ln_w: f64| -profile_log_likelihood(counts, bin_width, ln_w.exp());
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let ln_w = 0.5 * (lo + hi);
    if ln_w - lo0 < 1e-3 || hi0 - ln_w < 1e-3 {
        return Err(Error::estimation("pulse-width fit did not converge"));
    }
    let width = ln_w.exp();
    let h = 1e-3 * width;
    let ll = |w: f64| profile_log_likelihood(counts, bin_width, w);
    let curvature = (ll(width + h) - 2.0 * ll(width) + ll(width - h)) / (h * h);
    let width_sd = if curvature < 0.0 {
        (-1.0 / curvature).sqrt()
    } else {
        f64::INFINITY
    };
    let total_shape: f64 = gaussian_bin_shape(width, bin_width, counts.len()).iter().sum();
    Ok(GaussianFit {
        amplitude: total / total_shape,
        amplitude_sd: total.sqrt() / total_shape,
        width,
        width_sd,
    })
}

pub fn fit_gaussian(hist: &TauHistogram) -> Result<GaussianFit> {
    let counts: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    fit_gaussian_counts(&counts, hist.bin_width())
}

/// Exact composite Simpson of `f` over each bin, 8 subintervals per bin.
pub(crate) fn bin_integrals(f: impl Fn(f64) -> f64, bin_width: f64, nbins: usize) -> Vec<f64> {
    (0..nbins)
        .map(|b| simpson(&f, b as f64 * bin_width, (b + 1) as f64 * bin_width, 8))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::histogram::PairScope;
    use crate::simulate::{analytic_d, DetectorModel};
    use crate::states::QuantumState;

    fn analytic_histogram(width: f64, scale: u64) -> (TauHistogram, f64) {
        let mode = TemporalMode::gaussian(width, 0.0).unwrap();
        let state = QuantumState::thermal(1.0).unwrap();
        let det = DetectorModel::ideal();
        let bw = width / 20.0;
        let expected = bin_integrals(|t| analytic_d(&state, &det, &mode, scale, t), bw, 120);
        let counts = expected.iter().map(|e| e.round() as u64).collect();
        let d0 = analytic_d(&state, &det, &mode, scale, 0.0);
        (
            TauHistogram::from_counts(bw, counts, PairScope::SamePulse, Some(scale), 0).unwrap(),
            d0,
        )
    }

    #[test]
    fn shape_fit_recovers_analytic_d0() {
        let width = 1.0;
        let (hist, d0) = analytic_histogram(width, 1_000_000_000_000);
        let mode = TemporalMode::gaussian(width, 0.0).unwrap();
        let est = estimate_d0(&hist, Some(&mode)).unwrap();
        assert_eq!(est.method, D0Method::ShapeFit);
        assert!((est.value / d0 - 1.0).abs() < 1e-6, "{} vs {d0}", est.value);
    }

    #[test]
    fn central_bin_bias_is_second_order() {
        let width = 1.0;
        let (hist, d0) = analytic_histogram(width, 1_000_000_000_000);
        let est = estimate_d0(&hist, None).unwrap();
        assert_eq!(est.method, D0Method::CentralBin);
        // Residual bias is O(bin_width^4).
        assert!((est.value / d0 - 1.0).abs() < 1e-5, "{}", est.value / d0);
        let naive = hist.counts()[0] as f64 / hist.bin_width();
        assert!((naive / d0 - 1.0).abs() > 1e-4);
    }

    #[test]
    fn empty_histogram_flags_zero() {
        let hist = TauHistogram::from_counts(0.1, vec![0; 50], PairScope::SamePulse, Some(10), 10)
            .unwrap();
        let mode = TemporalMode::gaussian(1.0, 0.0).unwrap();
        let est = estimate_d0(&hist, Some(&mode)).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.zero_counts);
        assert!(est.uncertainty > 0.0 && est.uncertainty.is_finite());
    }

    #[test]
    fn gaussian_shapes_agree() {
        let mode = TemporalMode::gaussian(2.0, 0.0).unwrap();
        let a = mode_bin_shape(&mode, 0.1, 100);
        let b = gaussian_bin_shape(2.0, 0.1, 100);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8 * y.max(1e-3), "{x} {y}");
        }
    }

    #[test]
    fn width_fit_on_exact_histogram() {
        let (hist, d0) = analytic_histogram(3e-9, 1_000_000_000_000);
        let fit = fit_gaussian(&hist).unwrap();
        assert!((fit.width / 3e-9 - 1.0).abs() < 1e-6, "{}", fit.width);
        assert!((fit.amplitude / d0 - 1.0).abs() < 1e-6);
        assert!(fit.width_sd > 0.0);
    }

    #[test]
    fn width_fit_needs_pairs() {
        let hist = TauHistogram::from_counts(0.1, vec![1; 5], PairScope::SamePulse, Some(10), 10)
            .unwrap();
        assert!(fit_gaussian(&hist).is_err());
    }
}

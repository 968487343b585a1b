//! Estimators of D(tau), I_p(N), g2_p, the recovered state g2_q and the
//! stationary conditional probability, all computed from a [`ClickStream`].
//!
//! Histograms count unordered pairs at `tau >= 0`. Since D(tau) is even the
//! folded histogram loses nothing, and its expected bin content is
//! `D(tau) * bin_width`.
//!
//! Statistical uncertainties come from a block bootstrap: pulses (or time
//! blocks for stationary light) are grouped into contiguous blocks whose
//! summary features are resampled with replacement.
//!
//! [`ClickStream`]: crate::simulate::ClickStream

mod bootstrap;
mod d0;
mod histogram;
mod pulsed;
mod report;
mod stationary;

use serde::{Deserialize, Serialize};

pub use bootstrap::{block_bootstrap_sd, BootstrapOptions};
pub use d0::{
    estimate_d0, fit_gaussian, fit_gaussian_counts, gaussian_bin_shape, mode_bin_shape,
    D0Estimate, D0Method, GaussianFit,
};
pub use histogram::{tau_histogram, PairScope, TauHistogram};
pub use pulsed::{
    g2_sidepeak, g2_sidepeak_with, g2p, pn_histogram_g2q, recover_g2q_gaussian,
    recover_g2q_general, total_counts, PulsedSample, SidePeakOptions,
};
pub use report::{
    analyze_pulsed, analyze_stationary, expected_histogram, AnalysisOptions, CoherenceReport,
    StationaryReport,
};
pub use stationary::{
    stationary_conditional_probability, summarize_stationary, StationaryCurve, StationarySummary,
};

/// A point estimate with its one-sigma statistical uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
    /// The sample held no event of the kind the estimate counts, so `value`
    /// is zero and `uncertainty` is the one-event resolution.
    #[serde(default)]
    pub resolution_limited: bool,
}

impl Estimate {
    pub fn new(value: f64, uncertainty: f64) -> Self {
        Self {
            value,
            uncertainty,
            resolution_limited: false,
        }
    }

    /// `|value - target|` in units of the uncertainty.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.uncertainty
    }
}

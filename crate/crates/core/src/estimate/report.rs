use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::TemporalMode;
use crate::simulate::{analytic_d, ClickStream, DetectorModel, RunInfo};
use crate::states::QuantumState;

use super::bootstrap::BootstrapOptions;
use super::d0::{bin_integrals, fit_gaussian_counts, GaussianFit};
use super::histogram::{tau_histogram, PairScope, TauHistogram};
use super::pulsed::{gaussian_width, PulsedSample};
use super::stationary::{summarize_stationary, StationaryCurve};
use super::Estimate;

/// Relative disagreement between fitted and configured width that triggers
/// a warning.
const WIDTH_WARNING: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    /// Defaults to a twentieth of the D(tau) width (the mode hint's, else
    /// `period / 250`).
    pub bin_width: Option<f64>,
    /// Defaults to eight D(tau) widths, capped at half the period.
    pub max_tau: Option<f64>,
    /// Known pulse shape. Without it D(tau) is fitted as a Gaussian.
    pub mode_hint: Option<TemporalMode>,
    /// Source state, if known, for the analytic reference value.
    pub state: Option<QuantumState>,
    pub bootstrap: BootstrapOptions,
}

/// Everything estimated from one pulsed stream. Quantities that could not be
/// estimated are `None` and explained in `flags`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub g2q_analytic: Option<f64>,
    pub g2q_eta: Option<f64>,
    pub g2q_eta_sigma: Option<f64>,
    pub g2q_pn: Option<f64>,
    pub g2q_pn_sigma: Option<f64>,
    /// `D(0) / I_p^2`, per second.
    pub g2p: Option<f64>,
    pub g2p_sigma: Option<f64>,
    /// `g2p * N / eta(0)`, dimensionless.
    pub g2p_normalized: Option<f64>,
    pub g2p_normalized_sigma: Option<f64>,
    pub eta0_per_second: Option<f64>,
    #[serde(rename = "Ip")]
    pub ip: f64,
    #[serde(rename = "Ip_sigma")]
    pub ip_sigma: f64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "D0_per_second")]
    pub d0_per_second: Option<f64>,
    #[serde(rename = "D0_per_second_sigma")]
    pub d0_per_second_sigma: Option<f64>,
    /// S.d. of a Gaussian fitted to D(tau).
    pub fitted_width_seconds: Option<f64>,
    pub fitted_width_sigma: Option<f64>,
    pub bin_width_seconds: f64,
    pub max_tau_seconds: f64,
    pub pair_count: u64,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
}

fn split(e: Option<Estimate>) -> (Option<f64>, Option<f64>) {
    (e.map(|e| e.value), e.map(|e| e.uncertainty))
}

fn default_binning(
    opts: &AnalysisOptions,
    period: f64,
) -> Result<(f64, f64)> {
    let scale = opts
        .mode_hint
        .as_ref()
        .map_or(period / 12.5, TemporalMode::autocorrelation_width);
    let bin_width = opts.bin_width.unwrap_or(scale / 20.0);
    let max_tau = opts.max_tau.unwrap_or((8.0 * scale).min(0.5 * period));
    if !(bin_width > 0.0 && max_tau > bin_width) {
        return Err(Error::config(
            "estimator",
            "need 0 < bin_width < max_tau",
        ));
    }
    Ok((bin_width, max_tau))
}

/// Builds the same-pulse histogram and every pulsed estimate from it.
pub fn analyze_pulsed(
    stream: &ClickStream,
    opts: &AnalysisOptions,
) -> Result<(CoherenceReport, TauHistogram)> {
    let (num_pulses, period) = match stream.metadata.run {
        RunInfo::Pulsed { num_pulses, period } => (num_pulses, period),
        RunInfo::Stationary { .. } => {
            return Err(Error::domain("pulsed analysis needs a pulsed stream"))
        }
    };
    let (bin_width, max_tau) = default_binning(opts, period)?;
    let hist = tau_histogram(stream, bin_width, max_tau, PairScope::SamePulse)?;
    let mut report = CoherenceReport {
        g2q_analytic: opts.state.as_ref().and_then(|s| s.g2q_from_moments().ok()),
        g2q_eta: None,
        g2q_eta_sigma: None,
        g2q_pn: None,
        g2q_pn_sigma: None,
        g2p: None,
        g2p_sigma: None,
        g2p_normalized: None,
        g2p_normalized_sigma: None,
        eta0_per_second: None,
        ip: stream.len() as f64,
        ip_sigma: 0.0,
        n: num_pulses,
        d0_per_second: None,
        d0_per_second_sigma: None,
        fitted_width_seconds: None,
        fitted_width_sigma: None,
        bin_width_seconds: bin_width,
        max_tau_seconds: hist.max_tau(),
        pair_count: hist.pair_count(),
        flags: Vec::new(),
        warnings: Vec::new(),
    };
    if stream.is_empty() {
        report.flags.push("no_clicks".into());
        return Ok((report, hist));
    }
    if hist.pair_count() == 0 {
        report.flags.push("no_pairs".into());
    }

    let sample = PulsedSample::for_histogram(stream, &hist, opts.bootstrap)?;
    let ip = sample.intensity();
    report.ip_sigma = ip.uncertainty;

    let fit: Option<GaussianFit> = match fit_gaussian_counts(sample.pair_counts(), bin_width) {
        Ok(fit) => Some(fit),
        Err(_) => {
            report.flags.push("width_fit_failed".into());
            None
        }
    };
    report.fitted_width_seconds = fit.map(|f| f.width);
    report.fitted_width_sigma = fit.map(|f| f.width_sd);

    // D(0) comes from a fit of the mode's shape, unless the data contradict
    // that shape; then only the central bins are used so that a wrong hint
    // shows up in g2q_eta instead of being partly absorbed by the fit.
    let mut shape_trusted = true;
    let mode = match (&opts.mode_hint, fit) {
        (Some(hint), fit) => {
            if let (Some(w), Some(fit)) = (gaussian_width(hint), fit) {
                if (fit.width / w - 1.0).abs() > WIDTH_WARNING {
                    shape_trusted = false;
                    report.warnings.push(format!(
                        "fitted D(tau) width {:.4e} s differs from configured pulse width \
                         {w:.4e} s by more than {:.0}%",
                        fit.width,
                        WIDTH_WARNING * 100.0
                    ));
                }
            }
            Some(hint.clone())
        }
        (None, Some(fit)) => Some(TemporalMode::gaussian(fit.width, 0.0)?),
        (None, None) => None,
    };
    let shape = mode.as_ref().filter(|_| shape_trusted);

    let d0 = sample.d0(shape)?;
    (report.d0_per_second, report.d0_per_second_sigma) = split(Some(d0));
    (report.g2p, report.g2p_sigma) = split(Some(sample.g2p(shape)?));
    if let Some(mode) = &mode {
        let eta0 = mode.eta_numeric(0.0);
        report.eta0_per_second = Some(eta0);
        let g2q = sample.g2q_eta(num_pulses, shape, eta0)?;
        (report.g2q_eta, report.g2q_eta_sigma) = split(Some(g2q));
        let k = num_pulses as f64 / eta0;
        report.g2p_normalized = report.g2p.map(|g| g * k);
        report.g2p_normalized_sigma = report.g2p_sigma.map(|s| s * k);
    }
    (report.g2q_pn, report.g2q_pn_sigma) = split(Some(sample.g2q_pn()?));
    Ok((report, hist))
}

/// Expected same-pulse histogram counts, `integral over bin of D(tau)`.
pub fn expected_histogram(
    state: &QuantumState,
    detector: &DetectorModel,
    mode: &TemporalMode,
    hist: &TauHistogram,
) -> Option<Vec<f64>> {
    let n = hist.num_pulses()?;
    Some(bin_integrals(
        |t| analytic_d(state, detector, mode, n, t),
        hist.bin_width(),
        hist.len(),
    ))
}

/// Summary of a stationary stream's normalized correlation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub peak_ratio: f64,
    pub peak_ratio_sigma: f64,
    pub long_tau_ratio: f64,
    pub long_tau_ratio_sigma: f64,
    pub long_tau_seconds: f64,
    pub fwhm_seconds: Option<f64>,
    pub fwhm_sigma: Option<f64>,
    pub baseline_per_second: f64,
    pub total_clicks: u64,
    pub duration_seconds: f64,
    pub bin_width_seconds: f64,
}

/// Defaults: `1 / (50 bandwidth)` bins out to `3 / bandwidth`.
pub fn analyze_stationary(
    stream: &ClickStream,
    bin_width: Option<f64>,
    max_tau: Option<f64>,
    opts: &BootstrapOptions,
) -> Result<(StationaryReport, StationaryCurve)> {
    let bandwidth = match stream.metadata.run {
        RunInfo::Stationary { bandwidth, .. } => bandwidth,
        RunInfo::Pulsed { .. } => {
            return Err(Error::domain("stationary analysis needs a stationary stream"))
        }
    };
    let (bin_width, max_tau) = match (bin_width, max_tau, bandwidth) {
        (Some(b), Some(m), _) => (b, m),
        (b, m, Some(bw)) => (b.unwrap_or(1.0 / (50.0 * bw)), m.unwrap_or(3.0 / bw)),
        _ => {
            return Err(Error::config(
                "estimator",
                "bin_width and max_tau are required when the bandwidth is unknown",
            ))
        }
    };
    let (curve, s) = summarize_stationary(stream, bin_width, max_tau, None, opts)?;
    let report = StationaryReport {
        peak_ratio: s.peak_ratio.value,
        peak_ratio_sigma: s.peak_ratio.uncertainty,
        long_tau_ratio: s.long_tau_ratio.value,
        long_tau_ratio_sigma: s.long_tau_ratio.uncertainty,
        long_tau_seconds: s.long_tau,
        fwhm_seconds: s.fwhm.map(|e| e.value),
        fwhm_sigma: s.fwhm.map(|e| e.uncertainty),
        baseline_per_second: curve.baseline,
        total_clicks: curve.total_clicks,
        duration_seconds: curve.duration,
        bin_width_seconds: bin_width,
    };
    Ok((report, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_pulse_train, PulseTrainConfig};

    fn stream(state: &QuantumState, s: f64, n: u64) -> ClickStream {
        let mode = TemporalMode::gaussian(1e-9, 0.0).unwrap();
        let train = PulseTrainConfig::new(n, 12.5e-9, mode).unwrap();
        simulate_pulse_train(state, &DetectorModel::new(s).unwrap(), &train, 21)
    }

    #[test]
    fn report_is_self_consistent() {
        let state = QuantumState::thermal(1.0).unwrap();
        let s = stream(&state, 0.5, 100_000);
        let opts = AnalysisOptions {
            mode_hint: Some(TemporalMode::gaussian(1e-9, 0.0).unwrap()),
            state: Some(state),
            ..Default::default()
        };
        let (r, hist) = analyze_pulsed(&s, &opts).unwrap();
        assert_eq!(r.g2q_analytic, Some(2.0));
        let g2q = r.g2q_eta.unwrap();
        assert!((g2q - 2.0).abs() < 4.0 * r.g2q_eta_sigma.unwrap());
        let lhs = r.g2p.unwrap();
        let rhs = g2q * r.eta0_per_second.unwrap() / r.n as f64;
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        assert!(r.flags.is_empty());
        // Half the period caps the default range.
        assert_eq!(hist.len(), 125);

        let json = serde_json::to_value(&r).unwrap();
        for key in ["g2q_analytic", "g2q_eta", "g2q_pn", "g2p", "eta0_per_second", "Ip", "N", "D0_per_second"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn wrong_width_hint_warns() {
        let s = stream(&QuantumState::thermal(1.0).unwrap(), 0.5, 50_000);
        let opts = AnalysisOptions {
            mode_hint: Some(TemporalMode::gaussian(2e-9, 0.0).unwrap()),
            bin_width: Some(5e-11),
            max_tau: Some(6e-9),
            ..Default::default()
        };
        let (r, _) = analyze_pulsed(&s, &opts).unwrap();
        assert_eq!(r.warnings.len(), 1);
        // The recovered value scales with the assumed width.
        assert!((r.g2q_eta.unwrap() / 2.0 - 2.0).abs() < 0.4, "{:?}", r.g2q_eta);
    }

    #[test]
    fn empty_stream_gives_flagged_report() {
        let s = stream(&QuantumState::coherent(1.0).unwrap(), 0.0, 1000);
        let (r, _) = analyze_pulsed(&s, &AnalysisOptions::default()).unwrap();
        assert_eq!(r.flags, vec!["no_clicks".to_string()]);
        assert!(r.g2q_eta.is_none() && r.g2q_pn.is_none());
    }
}

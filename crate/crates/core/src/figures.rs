//! Datasets for re-plotting the four standard figures: count records of
//! chaotic vs Poisson light, the stationary bunching peak, the pulsed
//! time-difference distribution, and the pulse-width dependence of g2_p.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimate::{
    expected_histogram, stationary_conditional_probability, tau_histogram, PairScope,
};
use crate::modes::TemporalMode;
use crate::simulate::{
    analytic_d, simulate_pulse_train, simulate_stationary_poisson, simulate_stationary_thermal,
    DetectorModel, Lineshape, PulseTrainConfig, StationaryThermalConfig,
};
use crate::states::QuantumState;

/// Column-major numeric table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "{}", self.columns.join(",")).map_err(io)?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Knobs shared by the figure generators. Unset fields use per-figure
/// defaults.
#[derive(Debug, Clone, Default)]
pub struct FigureOptions {
    pub seed: u64,
    pub pulses: Option<u64>,
    pub state: Option<QuantumState>,
    pub mode: Option<TemporalMode>,
    pub efficiency: Option<f64>,
    pub bin_width: Option<f64>,
    pub max_tau: Option<f64>,
}

pub const FIGURE_IDS: [u32; 4] = [1, 2, 3, 4];

pub fn figure(id: u32, opts: &FigureOptions) -> Result<Table> {
    match id {
        1 => figure1(opts),
        2 => figure2(opts),
        3 => figure3(opts),
        4 => figure4(opts),
        _ => Err(Error::config("figure", format!("unknown figure {id}; expected 1-4"))),
    }
}

/// Clicks per time bin for chaotic and Poisson light of equal mean rate.
pub fn figure1(opts: &FigureOptions) -> Result<Table> {
    let rate = 1e7;
    let bandwidth = 1e6;
    let duration = 2e-4;
    let bin = opts.bin_width.unwrap_or(1e-7);
    let det = DetectorModel::new(opts.efficiency.unwrap_or(1.0))?;
    let cfg = StationaryThermalConfig::new(rate, bandwidth, duration, None, Lineshape::Gaussian)?;
    let chaotic = simulate_stationary_thermal(&cfg, &det, opts.seed);
    let poisson = simulate_stationary_poisson(rate, duration, &det, opts.seed)?;
    let nbins = (duration / bin).ceil() as usize;
    let counts = |stream: &crate::simulate::ClickStream| {
        let mut c = vec![0.0; nbins];
        for click in &stream.clicks {
            c[((click.time / bin) as usize).min(nbins - 1)] += 1.0;
        }
        c
    };
    let (a, b) = (counts(&chaotic), counts(&poisson));
    let mut t = Table::new(&["time_seconds", "thermal_counts", "coherent_counts"]);
    for i in 0..nbins {
        t.rows.push(vec![(i as f64 + 0.5) * bin, a[i], b[i]]);
    }
    Ok(t)
}

/// Conditional probability density of stationary chaotic light, with the
/// Siegert prediction and the baseline `s <I>`.
pub fn figure2(opts: &FigureOptions) -> Result<Table> {
    let bandwidth = 1e6;
    let rate = 1e6;
    let det = DetectorModel::new(opts.efficiency.unwrap_or(1.0))?;
    let cfg = StationaryThermalConfig::new(rate, bandwidth, 0.2, None, Lineshape::Gaussian)?;
    let stream = simulate_stationary_thermal(&cfg, &det, opts.seed);
    let bin = opts.bin_width.unwrap_or(1.0 / (50.0 * bandwidth));
    let max_tau = opts.max_tau.unwrap_or(3.0 / bandwidth);
    let curve = stationary_conditional_probability(&stream, bin, max_tau)?;
    let baseline = det.efficiency * rate;
    let mut t = Table::new(&[
        "tau_seconds",
        "conditional_probability_per_second",
        "g2",
        "g2_siegert",
        "baseline_per_second",
    ]);
    for (i, &tau) in curve.taus.iter().enumerate() {
        t.rows.push(vec![
            tau,
            curve.conditional_probability[i],
            curve.g2[i],
            cfg.g2(tau),
            baseline,
        ]);
    }
    Ok(t)
}

/// Same-pulse D(tau) histogram with the analytic expectation per bin and
/// the analytic density at the bin center.
pub fn figure3(opts: &FigureOptions) -> Result<Table> {
    let mode = match &opts.mode {
        Some(m) => m.clone(),
        None => TemporalMode::gaussian(1e-9, 0.0)?,
    };
    let state = match &opts.state {
        Some(s) => s.clone(),
        None => QuantumState::thermal(1.0)?,
    };
    let det = DetectorModel::new(opts.efficiency.unwrap_or(1.0))?;
    let n = opts.pulses.unwrap_or(100_000);
    let width = mode.autocorrelation_width();
    let train = PulseTrainConfig::new(n, 12.5 * mode.width(), mode.clone())?;
    let stream = simulate_pulse_train(&state, &det, &train, opts.seed);
    let bin = opts.bin_width.unwrap_or(width / 20.0);
    let max_tau = opts.max_tau.unwrap_or(5.0 * width);
    let hist = tau_histogram(&stream, bin, max_tau, PairScope::SamePulse)?;
    let expected = expected_histogram(&state, &det, &mode, &hist).expect("pulsed histogram");
    let mut t = Table::new(&["tau_seconds", "count", "expected_analytic", "d_analytic_per_second"]);
    for (i, &c) in hist.counts().iter().enumerate() {
        let tau = hist.bin_center(i);
        t.rows.push(vec![
            tau,
            c as f64,
            expected[i],
            analytic_d(&state, &det, &mode, n, tau),
        ]);
    }
    Ok(t)
}

/// `g2_p / g2_q = eta(0) / N` against pulse width at an 80 MHz repetition
/// rate, for several N. Units: per second.
pub fn figure4(opts: &FigureOptions) -> Result<Table> {
    let period = 12.5e-9;
    let pulse_counts: Vec<u64> = match opts.pulses {
        Some(n) => vec![n],
        None => vec![1_000, 10_000, 100_000, 1_000_000],
    };
    // Widths up to the largest that keeps pulses separated.
    let (lo, hi): (f64, f64) = (0.05e-9, period / 10.0 * 0.999);
    let points = 25;
    let mut t = Table::new(&[
        "delta_t_seconds",
        "num_pulses",
        "g2p_over_g2q_per_second",
        "closed_form_per_second",
    ]);
    for &n in &pulse_counts {
        for k in 0..points {
            let width = lo * (hi / lo).powf(k as f64 / (points - 1) as f64);
            let eta0 = TemporalMode::gaussian(width, 0.0)?.eta_numeric(0.0);
            t.rows.push(vec![
                width,
                n as f64,
                eta0 / n as f64,
                1.0 / ((2.0 * PI).sqrt() * width * n as f64),
            ]);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure4_matches_closed_form() {
        let t = figure4(&FigureOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 100);
        for r in &t.rows {
            assert!((r[2] / r[3] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn figure3_overlay_is_gaussian_in_tau() {
        let opts = FigureOptions {
            pulses: Some(20_000),
            ..Default::default()
        };
        let t = figure3(&opts).unwrap();
        let taus = t.column("tau_seconds").unwrap();
        let d = t.column("d_analytic_per_second").unwrap();
        for (tau, v) in taus.iter().zip(&d) {
            let ratio = v / d[0];
            let expected = (-(tau * tau - taus[0] * taus[0]) / (2.0 * 1e-18)).exp();
            assert!((ratio - expected).abs() < 1e-8, "{tau}: {ratio} vs {expected}");
        }
        let counts: f64 = t.column("count").unwrap().iter().sum();
        let expected: f64 = t.column("expected_analytic").unwrap().iter().sum();
        assert!((counts - expected).abs() < 5.0 * expected.sqrt() * 2.0);
    }

    #[test]
    fn figure1_has_equal_means() {
        let t = figure1(&FigureOptions::default()).unwrap();
        let a: f64 = t.column("thermal_counts").unwrap().iter().sum();
        let b: f64 = t.column("coherent_counts").unwrap().iter().sum();
        assert!((a / b - 1.0).abs() < 0.25, "{a} {b}");
        assert!(figure(5, &FigureOptions::default()).is_err());
    }
}

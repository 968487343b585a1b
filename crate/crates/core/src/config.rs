//! Declarative experiment description, stored as TOML.
//!
//! ```toml
//! seed = 7
//!
//! [source]
//! state = "thermal:0.5"
//! mode = "gauss:1e-9"
//!
//! [detector]
//! efficiency = 0.5
//!
//! [run]
//! kind = "pulsed"
//! pulses = 1000000
//! period = 12.5e-9
//! ```
//!
//! Unknown keys are rejected. Every randomized step draws from `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::BootstrapOptions;
use crate::modes::TemporalMode;
use crate::simulate::{
    simulate_pulse_train, simulate_stationary_poisson, simulate_stationary_thermal, ClickStream,
    DetectorModel, Lineshape, PulseTrainConfig, StationaryThermalConfig,
};
use crate::states::QuantumState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all outputs are identical for any value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// State grammar, e.g. `coherent:1`, `fock:2`, `mix:0.5*fock:1+0.5*fock:0`.
    pub state: String,
    /// Mode grammar, e.g. `gauss:1e-9`, `hg:1:1e-9`, `sampled:shape.csv`.
    pub mode: String,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            state: "coherent:1".into(),
            mode: "gauss:1e-9".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub dead_time: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            jitter: 0.0,
            dead_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StationaryLight {
    #[default]
    Chaotic,
    /// Constant rate, no intensity fluctuations.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunSpec {
    Pulsed {
        pulses: u64,
        period: f64,
    },
    Stationary {
        #[serde(default)]
        light: StationaryLight,
        /// Mean photon rate before detection, per second.
        mean_rate: f64,
        /// Spectral FWHM in Hz. Unused for Poisson light.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth: Option<f64>,
        duration: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field_timestep: Option<f64>,
        #[serde(default)]
        lineshape: Lineshape,
    },
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec::Pulsed {
            pulses: 100_000,
            period: 12.5e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    /// Defaults to a twentieth of the pulse width (pulsed) or
    /// `1 / (50 bandwidth)` (stationary).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tau: Option<f64>,
    /// Use the configured mode as the pulse-shape hint. When false, D(tau)
    /// is fitted as a Gaussian.
    #[serde(default = "yes")]
    pub use_mode_hint: bool,
    /// Half-width of the side-peak windows; half the period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_peak_window: Option<f64>,
    #[serde(default = "three")]
    pub side_peaks: usize,
    #[serde(default = "replicates")]
    pub bootstrap_replicates: usize,
    #[serde(default = "blocks")]
    pub bootstrap_blocks: usize,
}

fn yes() -> bool {
    true
}
fn three() -> usize {
    3
}
fn replicates() -> usize {
    BootstrapOptions::default().replicates
}
fn blocks() -> usize {
    BootstrapOptions::default().blocks
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            bin_width: None,
            max_tau: None,
            use_mode_hint: true,
            side_peak_window: None,
            side_peaks: 3,
            bootstrap_replicates: replicates(),
            bootstrap_blocks: blocks(),
        }
    }
}

/// Output locations, relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// `.bin` selects the binary format.
    pub stream: PathBuf,
    pub report: PathBuf,
    pub histogram: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            stream: "clicks.csv".into(),
            report: "report.json".into(),
            histogram: "histogram.csv".into(),
        }
    }
}

fn in_field(field: &str, e: Error) -> Error {
    match e {
        Error::Config { message, .. } => Error::config(field, message),
        Error::Domain(message) => Error::config(field, message),
        other => other,
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            source: SourceSpec::default(),
            detector: DetectorSpec::default(),
            run: RunSpec::default(),
            estimator: EstimatorSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates. Syntax errors carry the line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, message } => {
                Error::config(format!("{}: {field}", path.display()), message)
            }
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Checks that every section builds a valid model object.
    pub fn validate(&self) -> Result<()> {
        self.state()?;
        self.detector()?;
        match self.run {
            RunSpec::Pulsed { .. } => {
                self.pulse_train()?;
            }
            RunSpec::Stationary { light, .. } => {
                if light == StationaryLight::Chaotic {
                    self.stationary_thermal()?;
                }
            }
        }
        let est = &self.estimator;
        for (name, v) in [
            ("estimator.bin_width", est.bin_width),
            ("estimator.max_tau", est.max_tau),
            ("estimator.side_peak_window", est.side_peak_window),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::config(name, "must be positive"));
                }
            }
        }
        if est.bootstrap_replicates < 2 {
            return Err(Error::config("estimator.bootstrap_replicates", "need at least 2"));
        }
        if est.bootstrap_blocks < 2 {
            return Err(Error::config("estimator.bootstrap_blocks", "need at least 2"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        Ok(())
    }

    pub fn state(&self) -> Result<QuantumState> {
        self.source.state.parse().map_err(|e| in_field("source.state", e))
    }

    pub fn mode(&self) -> Result<TemporalMode> {
        self.source.mode.parse().map_err(|e| in_field("source.mode", e))
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        let d = &self.detector;
        DetectorModel::with_imperfections(d.efficiency, d.jitter, d.dead_time)
    }

    pub fn pulse_train(&self) -> Result<PulseTrainConfig> {
        match self.run {
            RunSpec::Pulsed { pulses, period } => PulseTrainConfig::new(pulses, period, self.mode()?),
            RunSpec::Stationary { .. } => Err(Error::config("run.kind", "not a pulsed run")),
        }
    }

    pub fn stationary_thermal(&self) -> Result<StationaryThermalConfig> {
        match self.run {
            RunSpec::Stationary {
                mean_rate,
                bandwidth,
                duration,
                field_timestep,
                lineshape,
                ..
            } => {
                let bandwidth = bandwidth
                    .ok_or_else(|| Error::config("run.bandwidth", "required for chaotic light"))?;
                StationaryThermalConfig::new(mean_rate, bandwidth, duration, field_timestep, lineshape)
            }
            RunSpec::Pulsed { .. } => Err(Error::config("run.kind", "not a stationary run")),
        }
    }

    pub fn bootstrap(&self) -> BootstrapOptions {
        BootstrapOptions {
            replicates: self.estimator.bootstrap_replicates,
            blocks: self.estimator.bootstrap_blocks,
            seed: self.seed,
        }
    }

    /// Runs the configured simulation.
    pub fn simulate(&self) -> Result<ClickStream> {
        let detector = self.detector()?;
        match self.run {
            RunSpec::Pulsed { .. } => Ok(simulate_pulse_train(
                &self.state()?,
                &detector,
                &self.pulse_train()?,
                self.seed,
            )),
            RunSpec::Stationary {
                light: StationaryLight::Chaotic,
                ..
            } => Ok(simulate_stationary_thermal(
                &self.stationary_thermal()?,
                &detector,
                self.seed,
            )),
            RunSpec::Stationary {
                light: StationaryLight::Poisson,
                mean_rate,
                duration,
                ..
            } => simulate_stationary_poisson(mean_rate, duration, &detector, self.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
seed = 11
threads = 2

[source]
state = "mix:0.5*thermal:1+0.5*fock:2"
mode = "hg:1:2e-9@1e-9"

[detector]
efficiency = 0.4
jitter = 1e-11

[run]
kind = "pulsed"
pulses = 5000
period = 5e-8

[estimator]
bin_width = 1e-10
max_tau = 2e-8
side_peaks = 2

[output]
stream = "out/clicks.bin"
report = "out/report.json"
histogram = "out/hist.csv"
"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg = ExperimentConfig::from_toml(FULL).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.to_toml(), cfg.to_toml());

        let stationary = ExperimentConfig {
            run: RunSpec::Stationary {
                light: StationaryLight::Chaotic,
                mean_rate: 1e6,
                bandwidth: Some(1e6),
                duration: 1e-3,
                field_timestep: None,
                lineshape: Lineshape::Lorentzian,
            },
            ..Default::default()
        };
        let text = stationary.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), stationary);
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = ExperimentConfig::from_toml("seed = 3").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.run, RunSpec::default());
        assert_eq!(cfg.estimator.side_peaks, 3);
    }

    #[test]
    fn errors_name_the_field() {
        let unknown = ExperimentConfig::from_toml("[detector]\nefficiency = 0.5\ncolor = 1\n")
            .unwrap_err()
            .to_string();
        assert!(unknown.contains("color") && unknown.contains("line 3"), "{unknown}");

        let cases = [
            ("[source]\nstate = \"squeezed:1\"\nmode = \"gauss:1e-9\"", "source.state"),
            ("[source]\nstate = \"fock:1\"\nmode = \"gauss:-1\"", "source.mode"),
            ("[detector]\nefficiency = 1.5", "detector.efficiency"),
            ("[run]\nkind = \"pulsed\"\npulses = 10\nperiod = 5e-9", "run.period"),
            (
                "[run]\nkind = \"stationary\"\nmean_rate = 1e6\nduration = 1.0",
                "run.bandwidth",
            ),
            ("[estimator]\nbin_width = -1.0", "estimator.bin_width"),
        ];
        for (text, field) in cases {
            match ExperimentConfig::from_toml(text) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn poisson_run_needs_no_bandwidth() {
        let cfg = ExperimentConfig::from_toml(
            "[run]\nkind = \"stationary\"\nlight = \"poisson\"\nmean_rate = 1e4\nduration = 0.01",
        )
        .unwrap();
        assert!(!cfg.simulate().unwrap().is_empty());
    }
}

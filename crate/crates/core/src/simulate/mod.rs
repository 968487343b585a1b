//! Synthetic photodetector click streams and the closed-form curves they
//! should reproduce.
//!
//! Pulsed light in a single temporal mode is generated per pulse: a photon
//! number is drawn from `P_n`, each photon survives detection with
//! probability `s`, and the survivors get arrival times drawn independently
//! from `|v(t)|^2`. For a single mode the n-fold coincidence density
//! factorizes into `prod |v(t_i)|^2` times the n-th factorial moment, which is
//! exactly what independent arrival times conditioned on the photon number
//! produce.
//!
//! Stationary chaotic light is a Cox process: a circular Gaussian field is
//! synthesized on a time grid and clicks follow an inhomogeneous Poisson
//! process with rate proportional to `|E(t)|^2`.

mod analytic;
mod pulsed;
mod stationary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::TemporalMode;

pub use analytic::{analytic_d, analytic_ip, analytic_pc};
pub use pulsed::simulate_pulse_train;
pub use stationary::{
    simulate_stationary_poisson, simulate_stationary_thermal, Lineshape, StationaryThermalConfig,
};

/// Detector efficiency with optional timing jitter (Gaussian s.d.) and
/// non-paralyzable dead time. The defaults describe an ideal detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    #[serde(default)]
    pub timing_jitter: f64,
    #[serde(default)]
    pub dead_time: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64) -> Result<Self> {
        Self::with_imperfections(efficiency, 0.0, 0.0)
    }

    pub fn with_imperfections(efficiency: f64, timing_jitter: f64, dead_time: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::config("detector.efficiency", "must lie in [0, 1]"));
        }
        if !(timing_jitter.is_finite() && timing_jitter >= 0.0) {
            return Err(Error::config("detector.jitter", "must be finite and >= 0"));
        }
        if !(dead_time.is_finite() && dead_time >= 0.0) {
            return Err(Error::config("detector.dead_time", "must be finite and >= 0"));
        }
        Ok(Self {
            efficiency,
            timing_jitter,
            dead_time,
        })
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            timing_jitter: 0.0,
            dead_time: 0.0,
        }
    }
}

/// `num_pulses` pulses in slots of length `period`; each pulse carries
/// `mode`, shifted to the slot center.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrainConfig {
    num_pulses: u64,
    period: f64,
    mode: TemporalMode,
}

impl PulseTrainConfig {
    /// Rejects trains whose pulses would overlap (`period <= 10 * width`).
    pub fn new(num_pulses: u64, period: f64, mode: TemporalMode) -> Result<Self> {
        if num_pulses == 0 {
            return Err(Error::config("run.pulses", "need at least one pulse"));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::config("run.period", "must be positive"));
        }
        if period <= 10.0 * mode.width() {
            return Err(Error::config(
                "run.period",
                format!(
                    "pulses overlap: period {period:e} s must exceed 10 x pulse width {:e} s",
                    mode.width()
                ),
            ));
        }
        Ok(Self {
            num_pulses,
            period,
            mode,
        })
    }

    pub fn num_pulses(&self) -> u64 {
        self.num_pulses
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn mode(&self) -> &TemporalMode {
        &self.mode
    }

    /// Offset added to mode time for pulse `index`.
    pub fn slot_center(&self, index: u64) -> f64 {
        (index as f64 + 0.5) * self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Click {
    /// `None` for stationary runs.
    pub pulse: Option<u64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunInfo {
    Pulsed {
        num_pulses: u64,
        period: f64,
    },
    Stationary {
        mean_rate: f64,
        bandwidth: Option<f64>,
        duration: f64,
        field_timestep: Option<f64>,
        lineshape: Option<Lineshape>,
    },
}

/// Everything needed to regenerate a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMetadata {
    pub seed: u64,
    pub state: Option<String>,
    pub mode: Option<String>,
    pub detector: DetectorModel,
    pub run: RunInfo,
}

/// Time-ordered detection records.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickStream {
    pub clicks: Vec<Click>,
    pub metadata: StreamMetadata,
}

impl ClickStream {
    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }

    pub fn num_pulses(&self) -> Option<u64> {
        match self.metadata.run {
            RunInfo::Pulsed { num_pulses, .. } => Some(num_pulses),
            RunInfo::Stationary { .. } => None,
        }
    }

    pub fn is_pulsed(&self) -> bool {
        self.num_pulses().is_some()
    }

    /// Checks the ordering invariants: times finite and nondecreasing, pulse
    /// indices present on every record (pulsed) or none (stationary),
    /// nondecreasing, and below the pulse count.
    pub fn validate(&self) -> std::result::Result<(), (usize, String)> {
        let pulses = self.num_pulses();
        let mut prev: Option<&Click> = None;
        for (i, c) in self.clicks.iter().enumerate() {
            if !c.time.is_finite() {
                return Err((i, "time is not finite".into()));
            }
            match (pulses, c.pulse) {
                (Some(n), Some(p)) if p >= n => {
                    return Err((i, format!("pulse index {p} >= number of pulses {n}")))
                }
                (Some(_), None) => return Err((i, "missing pulse index".into())),
                (None, Some(_)) => return Err((i, "pulse index in stationary stream".into())),
                _ => {}
            }
            if let Some(p) = prev {
                if c.time < p.time {
                    return Err((i, "times not sorted".into()));
                }
                if c.pulse < p.pulse {
                    return Err((i, "pulse indices not sorted".into()));
                }
            }
            prev = Some(c);
        }
        Ok(())
    }
}

/// Adds Gaussian jitter (independent per click, keyed by click order within
/// its pulse or block) and re-sorts by time.
pub(crate) fn apply_jitter(clicks: &mut [Click], sigma: f64, seed: u64) {
    use crate::rng::{substream, Domain};
    use rand_distr::{Distribution, Normal};

    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("validated jitter");
    const BLOCK: usize = 4096;
    use rayon::prelude::*;
    clicks
        .par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = substream(seed, Domain::Jitter, block as u64);
            for c in chunk {
                c.time += normal.sample(&mut rng);
            }
        });
    // Stable, so clicks of equal time keep pulse order.
    clicks.par_sort_by(|a, b| a.time.total_cmp(&b.time).then(a.pulse.cmp(&b.pulse)));
}

/// Non-paralyzable dead time: a click within `dead_time` of the previous
/// *kept* click is dropped.
pub(crate) fn apply_dead_time(clicks: Vec<Click>, dead_time: f64) -> Vec<Click> {
    if dead_time <= 0.0 {
        return clicks;
    }
    let mut last = f64::NEG_INFINITY;
    clicks
        .into_iter()
        .filter(|c| {
            if c.time - last >= dead_time {
                last = c.time;
                true
            } else {
                false
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_time_is_non_paralyzable() {
        let clicks: Vec<Click> = [0.0, 0.5, 1.2, 1.9, 2.3]
            .iter()
            .map(|&t| Click { pulse: None, time: t })
            .collect();
        let kept: Vec<f64> = apply_dead_time(clicks, 1.0).iter().map(|c| c.time).collect();
        assert_eq!(kept, vec![0.0, 1.2, 2.3]);
    }

    #[test]
    fn overlapping_pulses_rejected() {
        let mode = TemporalMode::gaussian(1e-9, 0.0).unwrap();
        assert!(PulseTrainConfig::new(10, 12.5e-9, mode.clone()).is_ok());
        let err = PulseTrainConfig::new(10, 9e-9, mode.clone()).unwrap_err();
        assert!(err.to_string().contains("overlap"));
        assert!(PulseTrainConfig::new(0, 12.5e-9, mode).is_err());
    }

    #[test]
    fn detector_validation() {
        assert!(DetectorModel::new(1.5).is_err());
        assert!(DetectorModel::with_imperfections(0.5, -1.0, 0.0).is_err());
        assert_eq!(DetectorModel::new(1.0).unwrap(), DetectorModel::ideal());
    }
}

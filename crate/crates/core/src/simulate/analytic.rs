use crate::error::{Error, Result};
use crate::modes::TemporalMode;
use crate::states::QuantumState;

use super::DetectorModel;

/// Single-mode conditional click density at `t + tau` given a click at `t`:
/// `s <n(n-1)> / <n> |v(t+tau)|^2`. Depends on the two times only through
/// their sum.
pub fn analytic_pc(
    state: &QuantumState,
    detector: &DetectorModel,
    mode: &TemporalMode,
    t_plus_tau: f64,
) -> Result<f64> {
    let mean = state.mean_photon_number();
    if mean <= 0.0 {
        return Err(Error::domain("conditional probability undefined for vacuum"));
    }
    Ok(detector.efficiency * state.second_factorial_moment() / mean * mode.intensity(t_plus_tau))
}

/// Expected density of click-pair time differences over `num_pulses`
/// pulses: `N s^2 <n(n-1)> eta(tau)`.
pub fn analytic_d(
    state: &QuantumState,
    detector: &DetectorModel,
    mode: &TemporalMode,
    num_pulses: u64,
    tau: f64,
) -> f64 {
    let s = detector.efficiency;
    num_pulses as f64 * s * s * state.second_factorial_moment() * mode.eta_numeric(tau)
}

/// Expected total click count over `num_pulses` pulses: `N s <n>`.
pub fn analytic_ip(state: &QuantumState, detector: &DetectorModel, num_pulses: u64) -> f64 {
    num_pulses as f64 * detector.efficiency * state.mean_photon_number()
}

//! End-to-end checks of the pulsed estimators on simulated streams. Sample
//! sizes are reduced from the reference configurations so the suite stays
//! quick; tolerances are expressed in reported standard errors where the
//! estimator supplies one.

use std::f64::consts::PI;

use num_complex::Complex64;
use pulsed_g2::estimate::{
    estimate_d0, fit_gaussian, g2_sidepeak, g2p, pn_histogram_g2q, recover_g2q_gaussian,
    recover_g2q_general, tau_histogram, total_counts, BootstrapOptions, PairScope, PulsedSample,
};
use pulsed_g2::simulate::{
    analytic_d, simulate_pulse_train, ClickStream, DetectorModel, PulseTrainConfig,
};
use pulsed_g2::{QuantumState, TemporalMode};

fn train(state: &QuantumState, s: f64, mode: TemporalMode, pulses: u64, seed: u64) -> ClickStream {
    let period = 12.5 * mode.width();
    let cfg = PulseTrainConfig::new(pulses, period, mode).unwrap();
    simulate_pulse_train(state, &DetectorModel::new(s).unwrap(), &cfg, seed)
}

fn gaussian(width: f64) -> TemporalMode {
    TemporalMode::gaussian(width, 0.0).unwrap()
}

#[test]
fn thermal_histogram_width_pairs_and_d0() {
    let n = 200_000;
    let state = QuantumState::thermal(1.0).unwrap();
    let mode = gaussian(1.0);
    let stream = train(&state, 1.0, mode.clone(), n, 21);
    let hist = tau_histogram(&stream, 0.05, 6.0, PairScope::SamePulse).unwrap();

    // The autocorrelation of the Gaussian intensity has s.d. equal to the
    // amplitude width parameter.
    let fit = fit_gaussian(&hist).unwrap();
    assert!((fit.width - 1.0).abs() < 0.02, "width {}", fit.width);

    // Ordered pairs within a pulse: N <n(n-1)> s^2 on average, with the
    // spread set by the per-pulse variance of n(n-1).
    let pairs = hist.ordered_pair_count() as f64;
    let expected = n as f64 * state.second_factorial_moment();
    // Thermal factorial moments k! nbar^k give
    // E[(n(n-1))^2] = 24 nbar^4 + 24 nbar^3 + 4 nbar^2 = 52 at nbar = 1.
    let per_pulse_var = 52.0 - 4.0;
    let sd = (n as f64 * per_pulse_var).sqrt();
    assert!((pairs - expected).abs() < 5.0 * sd, "{pairs} vs {expected} +- {sd}");

    // Pairs cluster in bright pulses, so the error bar must come from the
    // per-pulse bootstrap rather than bin-wise Poisson counting.
    let opts = BootstrapOptions {
        seed: 5,
        ..Default::default()
    };
    let d0 = PulsedSample::for_histogram(&stream, &hist, opts)
        .unwrap()
        .d0(Some(&mode))
        .unwrap();
    let truth = analytic_d(&state, &DetectorModel::ideal(), &mode, n, 0.0);
    assert!(
        (d0.value - truth).abs() < 3.0 * d0.uncertainty,
        "{} +- {} vs {truth}",
        d0.value,
        d0.uncertainty
    );
}

#[test]
fn single_photons_give_no_pairs() {
    let stream = train(&QuantumState::fock(1), 1.0, gaussian(1e-9), 100, 1);
    assert_eq!(total_counts(&stream), 100);
    let hist = tau_histogram(&stream, 1e-10, 5e-9, PairScope::SamePulse).unwrap();
    assert!(hist.counts().iter().all(|&c| c == 0));
    let d0 = estimate_d0(&hist, Some(&gaussian(1e-9))).unwrap();
    assert_eq!(d0.value, 0.0);
    assert!(d0.zero_counts && d0.uncertainty > 0.0);
}

#[test]
fn coherent_g2p_follows_eta_over_n() {
    let n = 10_000;
    let stream = train(&QuantumState::coherent(1.0).unwrap(), 1.0, gaussian(1.0), n, 8);
    let hist = tau_histogram(&stream, 0.1, 5.0, PairScope::SamePulse).unwrap();
    let g = g2p(&stream, &hist, Some(&gaussian(1.0))).unwrap();
    let expected = 1.0 / ((2.0 * PI).sqrt() * n as f64);
    assert!((expected - 3.99e-5).abs() < 1e-7);
    assert!(
        (g.value - expected).abs() < 3.0 * g.uncertainty,
        "{} +- {} vs {expected}",
        g.value,
        g.uncertainty
    );
}

#[test]
fn gaussian_recovery_orders_states() {
    let n = 200_000;
    let mut values = Vec::new();
    for (i, state) in [
        QuantumState::fock(2),
        QuantumState::coherent(1.0).unwrap(),
        QuantumState::thermal(0.5).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let stream = train(state, 0.7, gaussian(1e-9), n, 40 + i as u64);
        let hist = tau_histogram(&stream, 5e-11, 6e-9, PairScope::SamePulse).unwrap();
        let fitted = recover_g2q_gaussian(&stream, &hist, n, None).unwrap();
        let known = recover_g2q_gaussian(&stream, &hist, n, Some(1e-9)).unwrap();
        let general = recover_g2q_general(&stream, &hist, n, &gaussian(1e-9)).unwrap();
        let target = state.g2q_from_moments().unwrap();
        for e in [fitted, known] {
            assert!(
                (e.value - target).abs() < 4.0 * e.uncertainty,
                "{target}: {} +- {}",
                e.value,
                e.uncertainty
            );
        }
        assert!((known.value / general.value - 1.0).abs() < 1e-6);
        values.push(known.value);
    }
    assert!(values[0] < values[1] && values[1] < values[2], "{values:?}");
}

#[test]
fn general_recovery_handles_other_pulse_shapes() {
    let n = 200_000;
    let hg = TemporalMode::hermite_gauss(1, 1e-9, 0.0).unwrap();
    let stream = train(&QuantumState::thermal(1.0).unwrap(), 1.0, hg.clone(), n, 3);
    let w = hg.autocorrelation_width();
    let hist = tau_histogram(&stream, w / 20.0, 6.0 * w, PairScope::SamePulse).unwrap();
    let g = recover_g2q_general(&stream, &hist, n, &hg).unwrap();
    assert!((g.value - 2.0).abs() < 0.1, "{} +- {}", g.value, g.uncertainty);

    // Two Gaussian lobes of different width and weight.
    let lobe = |t: f64, c: f64, w: f64| (-(t - c) * (t - c) / (2.0 * w * w)).exp();
    let asym = TemporalMode::sampled_from_fn(-5e-9, 8e-9, 1301, |t| {
        Complex64::new(lobe(t, 0.0, 1e-9) + 0.6 * lobe(t, 2.5e-9, 0.5e-9), 0.0)
    })
    .unwrap();
    let stream = train(&QuantumState::coherent(1.0).unwrap(), 1.0, asym.clone(), n, 4);
    let w = asym.autocorrelation_width();
    let hist = tau_histogram(&stream, w / 20.0, 8.0 * w, PairScope::SamePulse).unwrap();
    let g = recover_g2q_general(&stream, &hist, n, &asym).unwrap();
    assert!((g.value - 1.0).abs() < 0.05, "{} +- {}", g.value, g.uncertainty);
}

#[test]
fn photon_number_estimator_is_loss_invariant() {
    let n = 200_000;
    let cases = [
        (QuantumState::fock(1), 0.4, 0.0, 0.01),
        (QuantumState::thermal(1.0).unwrap(), 0.3, 2.0, 0.1),
        (QuantumState::coherent(2.0).unwrap(), 0.5, 1.0, 0.04),
    ];
    for (i, (state, s, target, tol)) in cases.iter().enumerate() {
        let stream = train(state, *s, gaussian(1e-9), n, 60 + i as u64);
        let g = pn_histogram_g2q(&stream).unwrap();
        assert!((g.value - target).abs() < *tol, "{target}: {} +- {}", g.value, g.uncertainty);
        assert!(g.uncertainty > 0.0);
    }
}

#[test]
fn side_peaks_normalize_central_peak() {
    let n = 200_000;
    let window = 6.25e-9;
    let cases = [
        (QuantumState::coherent(1.0).unwrap(), 1.0, 0.05),
        (QuantumState::thermal(1.0).unwrap(), 2.0, 0.1),
        (QuantumState::fock(1), 0.0, 0.01),
    ];
    for (i, (state, target, tol)) in cases.iter().enumerate() {
        let stream = train(state, 0.5, gaussian(1e-9), n, 80 + i as u64);
        let g = g2_sidepeak(&stream, window).unwrap();
        assert!((g.value - target).abs() < *tol, "{target}: {} +- {}", g.value, g.uncertainty);
    }
}

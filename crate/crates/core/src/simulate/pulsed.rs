use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::rng::{substream, Domain};
use crate::states::QuantumState;

use super::{
    apply_dead_time, apply_jitter, Click, ClickStream, DetectorModel, PulseTrainConfig, RunInfo,
    StreamMetadata,
};

const PULSES_PER_TASK: u64 = 4096;

/// Clicks of one pulse, in time order. Pulse `index` always draws from the
/// same substream, so the result does not depend on scheduling.
fn simulate_pulse(
    state: &QuantumState,
    efficiency: f64,
    train: &PulseTrainConfig,
    seed: u64,
    index: u64,
    out: &mut Vec<Click>,
) {
    let mut rng = substream(seed, Domain::Pulse, index);
    let photons = state.sample_photon_number(&mut rng) as u64;
    let kept = if efficiency >= 1.0 {
        photons
    } else if photons == 0 || efficiency <= 0.0 {
        0
    } else {
        Binomial::new(photons, efficiency)
            .expect("validated efficiency")
            .sample(&mut rng)
    };
    let start = out.len();
    let offset = train.slot_center(index);
    for _ in 0..kept {
        out.push(Click {
            pulse: Some(index),
            time: offset + train.mode().sample_arrival(&mut rng),
        });
    }
    out[start..].sort_by(|a, b| a.time.total_cmp(&b.time));
}

/// Simulates `train.num_pulses()` independent pulses of `state` seen by
/// `detector`. Identical arguments give bit-identical streams regardless of
/// the rayon thread count.
pub fn simulate_pulse_train(
    state: &QuantumState,
    detector: &DetectorModel,
    train: &PulseTrainConfig,
    seed: u64,
) -> ClickStream {
    let n = train.num_pulses();
    let tasks = n.div_ceil(PULSES_PER_TASK);
    let chunks: Vec<Vec<Click>> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut clicks = Vec::new();
            let end = ((task + 1) * PULSES_PER_TASK).min(n);
            for index in task * PULSES_PER_TASK..end {
                simulate_pulse(state, detector.efficiency, train, seed, index, &mut clicks);
            }
            clicks
        })
        .collect();
    let mut clicks: Vec<Click> = chunks.concat();

    // Arrival times far in a mode's tail may spill into the next slot.
    if !clicks.is_sorted_by(|a, b| a.time <= b.time) {
        clicks.par_sort_by(|a, b| a.time.total_cmp(&b.time).then(a.pulse.cmp(&b.pulse)));
    }
    apply_jitter(&mut clicks, detector.timing_jitter, seed);
    let clicks = apply_dead_time(clicks, detector.dead_time);

    ClickStream {
        clicks,
        metadata: StreamMetadata {
            seed,
            state: Some(state.to_string()),
            mode: Some(train.mode().to_string()),
            detector: *detector,
            run: RunInfo::Pulsed {
                num_pulses: n,
                period: train.period(),
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::TemporalMode;

    fn train(n: u64) -> PulseTrainConfig {
        PulseTrainConfig::new(n, 12.5e-9, TemporalMode::gaussian(1e-9, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn single_photons_click_once_per_pulse() {
        let stream =
            simulate_pulse_train(&QuantumState::fock(1), &DetectorModel::ideal(), &train(1_000_000), 3);
        assert_eq!(stream.len(), 1_000_000);
        assert!(stream
            .clicks
            .iter()
            .enumerate()
            .all(|(i, c)| c.pulse == Some(i as u64)));
        stream.validate().unwrap();
    }

    #[test]
    fn coherent_count_matches_thinned_mean() {
        let state = QuantumState::coherent(0.2).unwrap();
        let det = DetectorModel::new(0.5).unwrap();
        let stream = simulate_pulse_train(&state, &det, &train(1_000_000), 11);
        let expected: f64 = 1e5;
        let sigma = expected.sqrt();
        assert!(((stream.len() as f64) - expected).abs() < 3.0 * sigma, "{}", stream.len());
    }

    #[test]
    fn zero_efficiency_gives_empty_stream() {
        let det = DetectorModel::new(0.0).unwrap();
        let stream = simulate_pulse_train(&QuantumState::thermal(2.0).unwrap(), &det, &train(1000), 1);
        assert!(stream.is_empty());
    }

    #[test]
    fn clicks_stay_in_their_slot() {
        let t = train(10_000);
        let stream = simulate_pulse_train(&QuantumState::fock(3), &DetectorModel::ideal(), &t, 5);
        stream.validate().unwrap();
        for c in &stream.clicks {
            let p = c.pulse.unwrap();
            assert!((c.time - t.slot_center(p)).abs() < t.period() / 2.0);
        }
    }

    #[test]
    fn jitter_and_dead_time_applied() {
        let t = train(10_000);
        let det = DetectorModel::with_imperfections(1.0, 0.2e-9, 5e-9).unwrap();
        let stream = simulate_pulse_train(&QuantumState::fock(2), &det, &t, 5);
        stream.validate().unwrap();
        // Both photons of a pulse fall within the dead time, so one survives.
        assert_eq!(stream.len(), 10_000);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let state = QuantumState::thermal(1.0).unwrap();
        let det = DetectorModel::with_imperfections(0.6, 1e-11, 0.0).unwrap();
        let t = train(50_000);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_pulse_train(&state, &det, &t, 99))
        };
        assert_eq!(run(1), run(4));
    }
}

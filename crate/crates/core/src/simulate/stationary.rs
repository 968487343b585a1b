use std::f64::consts::PI;

use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Domain, SubstreamRng};

use super::{apply_dead_time, apply_jitter, Click, ClickStream, DetectorModel, RunInfo, StreamMetadata};

/// Field samples per noise block.
const BLOCK: usize = 1 << 16;
/// The Gaussian filter kernel is cut at this many standard deviations.
const KERNEL_SIGMAS: f64 = 6.0;

/// Power spectrum of the chaotic field. `bandwidth` is the spectral FWHM
/// in both cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Lineshape {
    #[default]
    Gaussian,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryThermalConfig {
    mean_rate: f64,
    bandwidth: f64,
    duration: f64,
    field_timestep: f64,
    lineshape: Lineshape,
}

impl StationaryThermalConfig {
    /// `field_timestep` defaults to `1 / (20 bandwidth)`, the coarsest step
    /// allowed. The duration must cover at least 100 coherence times.
    pub fn new(
        mean_rate: f64,
        bandwidth: f64,
        duration: f64,
        field_timestep: Option<f64>,
        lineshape: Lineshape,
    ) -> Result<Self> {
        if !(mean_rate.is_finite() && mean_rate >= 0.0) {
            return Err(Error::config("run.mean_rate", "must be finite and >= 0"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::config("run.bandwidth", "must be positive"));
        }
        let max_step = 1.0 / (20.0 * bandwidth);
        let field_timestep = field_timestep.unwrap_or(max_step);
        if !(field_timestep > 0.0) {
            return Err(Error::config("run.field_timestep", "must be positive"));
        }
        if field_timestep > max_step * (1.0 + 1e-12) {
            return Err(Error::config(
                "run.field_timestep",
                format!("timestep too coarse: {field_timestep:e} s > 1/(20 bandwidth) = {max_step:e} s"),
            ));
        }
        if !(duration.is_finite() && duration >= 100.0 / bandwidth) {
            return Err(Error::config(
                "run.duration",
                format!("must be at least 100 / bandwidth = {:e} s", 100.0 / bandwidth),
            ));
        }
        Ok(Self {
            mean_rate,
            bandwidth,
            duration,
            field_timestep,
            lineshape,
        })
    }

    pub fn mean_rate(&self) -> f64 {
        self.mean_rate
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn field_timestep(&self) -> f64 {
        self.field_timestep
    }

    pub fn lineshape(&self) -> Lineshape {
        self.lineshape
    }

    /// `|g1(tau)|` of the synthesized field.
    pub fn g1(&self, tau: f64) -> f64 {
        match self.lineshape {
            Lineshape::Gaussian => {
                let sigma_nu = self.bandwidth / (2.0 * (2.0 * 2f64.ln()).sqrt());
                (-2.0 * PI * PI * sigma_nu * sigma_nu * tau * tau).exp()
            }
            Lineshape::Lorentzian => (-PI * self.bandwidth * tau.abs()).exp(),
        }
    }

    /// Siegert relation, `1 + |g1(tau)|^2`.
    pub fn g2(&self, tau: f64) -> f64 {
        let g1 = self.g1(tau);
        1.0 + g1 * g1
    }

    /// `integral |g1|^2 dtau` over the real line.
    pub fn coherence_time(&self) -> f64 {
        match self.lineshape {
            Lineshape::Gaussian => {
                let sigma_nu = self.bandwidth / (2.0 * (2.0 * 2f64.ln()).sqrt());
                1.0 / (2.0 * PI.sqrt() * sigma_nu)
            }
            Lineshape::Lorentzian => 1.0 / (PI * self.bandwidth),
        }
    }

    fn steps(&self) -> usize {
        (self.duration / self.field_timestep).ceil() as usize
    }
}

fn complex_normal(rng: &mut SubstreamRng) -> (f64, f64) {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// Unit-variance circular white noise for block `b`, as (re, im) columns.
fn noise_block(seed: u64, b: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = substream(seed, Domain::FieldNoise, b as u64);
    (0..BLOCK).map(|_| complex_normal(&mut rng)).unzip()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Writes `|E_k|^2` for every field step into `sink`, block by block.
///
/// Gaussian: white noise convolved with a Gaussian kernel normalized to
/// unit output variance. Lorentzian: the exact AR(1) discretization of the
/// Ornstein-Uhlenbeck field.
fn synthesize_intensity(cfg: &StationaryThermalConfig, dt: f64, seed: u64, mut sink: impl FnMut(&[f64])) {
    let steps = cfg.steps();
    match cfg.lineshape {
        Lineshape::Gaussian => {
            let sigma_nu = cfg.bandwidth / (2.0 * (2.0 * 2f64.ln()).sqrt());
            let sigma_h = 1.0 / (2.0 * std::f64::consts::SQRT_2 * PI * sigma_nu);
            let half = (KERNEL_SIGMAS * sigma_h / dt).ceil() as usize;
            assert!(2 * half < BLOCK, "filter kernel longer than a noise block");
            let mut kernel: Vec<f64> = (0..=2 * half)
                .map(|m| {
                    let t = (m as f64 - half as f64) * dt;
                    (-t * t / (2.0 * sigma_h * sigma_h)).exp()
                })
                .collect();
            let energy: f64 = kernel.iter().map(|h| h * h).sum();
            kernel.iter_mut().for_each(|h| *h /= energy.sqrt());
            let taps = kernel.len();

            // E_k = sum_m h_m w_{k+m}: block b reads noise blocks b and b+1.
            let (mut cur_re, mut cur_im) = noise_block(seed, 0);
            let mut out = vec![0.0; BLOCK];
            for b in 0..steps.div_ceil(BLOCK) {
                let (next_re, next_im) = noise_block(seed, b + 1);
                let len = (steps - b * BLOCK).min(BLOCK);
                cur_re.extend_from_slice(&next_re[..taps]);
                cur_im.extend_from_slice(&next_im[..taps]);
                const CHUNK: usize = 2048;
                out[..len].par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                    for (i, slot) in chunk.iter_mut().enumerate() {
                        let k = c * CHUNK + i;
                        let re = dot(&kernel, &cur_re[k..k + taps]);
                        let im = dot(&kernel, &cur_im[k..k + taps]);
                        *slot = re * re + im * im;
                    }
                });
                sink(&out[..len]);
                (cur_re, cur_im) = (next_re, next_im);
            }
        }
        Lineshape::Lorentzian => {
            let a = (-PI * cfg.bandwidth * dt).exp();
            let b = (1.0 - a * a).sqrt();
            let mut rng = substream(seed, Domain::FieldNoise, 0);
            let mut field = complex_normal(&mut rng);
            let mut out = Vec::with_capacity(BLOCK);
            for _ in 0..steps {
                out.push(field.0 * field.0 + field.1 * field.1);
                let w = complex_normal(&mut rng);
                field = (a * field.0 + b * w.0, a * field.1 + b * w.1);
                if out.len() == BLOCK {
                    sink(&out);
                    out.clear();
                }
            }
            if !out.is_empty() {
                sink(&out);
            }
        }
    }
}

/// Chaotic light as a Cox process: clicks from an inhomogeneous Poisson
/// process with rate `s * mean_rate * |E(t)|^2`, the field held constant
/// over each timestep.
pub fn simulate_stationary_thermal(
    cfg: &StationaryThermalConfig,
    detector: &DetectorModel,
    seed: u64,
) -> ClickStream {
    let dt = cfg.duration / cfg.steps() as f64;
    let scale = cfg.mean_rate * detector.efficiency;
    let mut rng = substream(seed, Domain::StationaryClicks, 0);
    let mut clicks = Vec::new();
    // Integrated intensity left before the next click.
    let mut remaining: f64 = Exp1.sample(&mut rng);
    let mut step = 0usize;
    synthesize_intensity(cfg, dt, seed, |intensity| {
        for &i in intensity {
            let rate = scale * i;
            let mass = rate * dt;
            let mut used = 0.0;
            while remaining <= mass - used {
                used += remaining;
                clicks.push(Click {
                    pulse: None,
                    time: step as f64 * dt + used / rate,
                });
                remaining = Exp1.sample(&mut rng);
            }
            remaining -= mass - used;
            step += 1;
        }
    });
    finish(
        clicks,
        detector,
        seed,
        "chaotic",
        RunInfo::Stationary {
            mean_rate: cfg.mean_rate,
            bandwidth: Some(cfg.bandwidth),
            duration: cfg.duration,
            field_timestep: Some(dt),
            lineshape: Some(cfg.lineshape),
        },
    )
}

/// Constant-rate Poisson clicks (stationary coherent light), the control
/// case for the chaotic simulation.
pub fn simulate_stationary_poisson(
    mean_rate: f64,
    duration: f64,
    detector: &DetectorModel,
    seed: u64,
) -> Result<ClickStream> {
    if !(mean_rate.is_finite() && mean_rate >= 0.0) {
        return Err(Error::config("run.mean_rate", "must be finite and >= 0"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::config("run.duration", "must be positive"));
    }
    let rate = mean_rate * detector.efficiency;
    let mut rng = substream(seed, Domain::StationaryClicks, 0);
    let mut clicks = Vec::new();
    if rate > 0.0 {
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            t += gap / rate;
            if t >= duration {
                break;
            }
            clicks.push(Click { pulse: None, time: t });
        }
    }
    Ok(finish(
        clicks,
        detector,
        seed,
        "poisson",
        RunInfo::Stationary {
            mean_rate,
            bandwidth: None,
            duration,
            field_timestep: None,
            lineshape: None,
        },
    ))
}

fn finish(
    mut clicks: Vec<Click>,
    detector: &DetectorModel,
    seed: u64,
    label: &str,
    run: RunInfo,
) -> ClickStream {
    apply_jitter(&mut clicks, detector.timing_jitter, seed);
    let clicks = apply_dead_time(clicks, detector.dead_time);
    ClickStream {
        clicks,
        metadata: StreamMetadata {
            seed,
            state: Some(label.into()),
            mode: None,
            detector: *detector,
            run,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(lineshape: Lineshape) -> StationaryThermalConfig {
        StationaryThermalConfig::new(1e5, 1e6, 10.0, None, lineshape).unwrap()
    }

    #[test]
    fn rejects_coarse_timestep() {
        let err = StationaryThermalConfig::new(1e5, 1e6, 1.0, Some(1e-7), Lineshape::Gaussian)
            .unwrap_err();
        assert!(err.to_string().contains("too coarse"));
        assert!(StationaryThermalConfig::new(1e5, 1e6, 1e-6, None, Lineshape::Gaussian).is_err());
    }

    #[test]
    fn total_count_matches_mean_rate() {
        let cfg = StationaryThermalConfig::new(1e6, 1e6, 1.0, None, Lineshape::Gaussian).unwrap();
        let stream = simulate_stationary_thermal(&cfg, &DetectorModel::ideal(), 1);
        // Cox-process count variance: <N> + <N>^2 tau_c / T.
        let expected = 1e6;
        let sigma = (expected + expected * expected * cfg.coherence_time() / cfg.duration()).sqrt();
        assert!(((stream.len() as f64) - expected).abs() < 3.0 * sigma, "{}", stream.len());
        stream.validate().unwrap();
        assert!(stream.clicks.last().unwrap().time < 1.0);
    }

    #[test]
    fn lorentzian_count_matches_mean_rate() {
        let cfg = StationaryThermalConfig::new(1e5, 1e6, 2.0, None, Lineshape::Lorentzian).unwrap();
        let stream = simulate_stationary_thermal(&cfg, &DetectorModel::new(0.5).unwrap(), 4);
        assert!(((stream.len() as f64) - 1e5).abs() < 3.0 * 1e5f64.sqrt() * 1.1, "{}", stream.len());
    }

    #[test]
    fn field_intensity_has_thermal_moments() {
        let cfg = StationaryThermalConfig::new(1.0, 1e6, 0.1, None, Lineshape::Gaussian).unwrap();
        let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
        synthesize_intensity(&cfg, cfg.field_timestep(), 8, |block| {
            for &i in block {
                n += 1.0;
                s1 += i;
                s2 += i * i;
            }
        });
        let mean = s1 / n;
        let g2 = s2 / n / (mean * mean);
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!((g2 - 2.0).abs() < 0.05, "{g2}");
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = StationaryThermalConfig::new(1e6, 1e6, 1e-3, None, Lineshape::Gaussian).unwrap();
        let a = simulate_stationary_thermal(&cfg, &DetectorModel::ideal(), 17);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| simulate_stationary_thermal(&cfg, &DetectorModel::ideal(), 17));
        assert_eq!(a, b);
    }

    #[test]
    fn siegert_curves() {
        for shape in [Lineshape::Gaussian, Lineshape::Lorentzian] {
            let cfg = config(shape);
            assert_eq!(cfg.g2(0.0), 2.0);
            assert!((cfg.g2(20.0 / cfg.bandwidth()) - 1.0).abs() < 1e-12);
            // integral |g1|^2 against the closed form
            let numeric = 2.0 * crate::quadrature::simpson_step(
                |t| cfg.g1(t).powi(2),
                0.0,
                50.0 / cfg.bandwidth(),
                1e-3 / cfg.bandwidth(),
            );
            assert!((numeric / cfg.coherence_time() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn poisson_control_count() {
        let stream = simulate_stationary_poisson(1e5, 1.0, &DetectorModel::ideal(), 2).unwrap();
        assert!(((stream.len() as f64) - 1e5).abs() < 3.0 * 1e5f64.sqrt());
    }
}

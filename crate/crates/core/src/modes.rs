//! Temporal mode functions and the pulse-shape overlap factor eta(tau).
//!
//! Modes are normalized to unit energy at construction, so the intensity
//! profile `|v(t)|^2` is a probability density in `t` and
//! `eta(tau) = integral |v(t+tau)|^2 |v(t)|^2 dt` needs no further division.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre3, simpson_step};

/// Parametric modes are integrated over `center +/- SPAN_WIDTHS * width`
/// (plus the extra spread of higher Hermite-Gauss orders).
const SPAN_WIDTHS: f64 = 8.0;
/// Quadrature steps per width for parametric modes.
const STEPS_PER_WIDTH: f64 = 200.0;
/// Quadrature steps per grid spacing for sampled modes.
const STEPS_PER_SAMPLE: f64 = 4.0;
/// A sampled grid must resolve the r.m.s. intensity width this finely.
const MIN_SAMPLES_PER_WIDTH: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ModeKind {
    Gaussian {
        width: f64,
        center: f64,
    },
    HermiteGauss {
        order: usize,
        width: f64,
        center: f64,
    },
    /// Uniform grid starting at `start` with spacing `step`. Amplitudes are
    /// stored normalized; between nodes the amplitude is linearly
    /// interpolated and it is zero outside the grid.
    Sampled {
        start: f64,
        step: f64,
        amplitudes: Vec<Complex64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    kind: ModeKind,
    raw_norm: f64,
    peak_intensity: f64,
    label: Option<String>,
}

impl TemporalMode {
    /// `v(t) ∝ exp(-(t - center)^2 / 2 width^2)`.
    pub fn gaussian(width: f64, center: f64) -> Result<Self> {
        Self::hermite_gauss(0, width, center)
    }

    /// Hermite-Gauss mode of the given order (physicists' convention, same
    /// envelope as [`TemporalMode::gaussian`]).
    pub fn hermite_gauss(order: usize, width: f64, center: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::domain("mode width must be positive and finite"));
        }
        if !center.is_finite() {
            return Err(Error::domain("mode center must be finite"));
        }
        let kind = if order == 0 {
            ModeKind::Gaussian { width, center }
        } else {
            ModeKind::HermiteGauss {
                order,
                width,
                center,
            }
        };
        let ln_norm = order as f64 * 2f64.ln()
            + statrs::function::factorial::ln_factorial(order as u64)
            + (PI.sqrt() * width).ln();
        let mut mode = Self {
            kind,
            raw_norm: ln_norm.exp(),
            peak_intensity: 0.0,
            label: None,
        };
        mode.peak_intensity = if order == 0 {
            1.0 / (width * PI.sqrt())
        } else {
            let (lo, hi) = mode.support();
            let n = ((hi - lo) / (width / STEPS_PER_WIDTH)).ceil() as usize;
            (0..=n)
                .map(|i| mode.intensity(lo + (hi - lo) * i as f64 / n as f64))
                .fold(0.0, f64::max)
                * (1.0 + 1e-3)
        };
        Ok(mode)
    }

    /// A mode tabulated on a uniform grid. The amplitudes need not be
    /// normalized.
    pub fn sampled(start: f64, step: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 3 {
            return Err(Error::domain("sampled mode needs at least 3 grid points"));
        }
        if !(step.is_finite() && step > 0.0) || !start.is_finite() {
            return Err(Error::domain("sampled mode grid must be finite with positive spacing"));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::domain("sampled mode amplitudes must be finite"));
        }
        // Exact integral of |linear interpolant|^2 over each segment.
        let raw_norm: f64 = amplitudes
            .windows(2)
            .map(|w| step * (w[0].norm_sqr() + (w[0] * w[1].conj()).re + w[1].norm_sqr()) / 3.0)
            .sum();
        if !(raw_norm > 0.0) {
            return Err(Error::domain("sampled mode has zero energy"));
        }
        let scale = raw_norm.sqrt().recip();
        let amplitudes: Vec<Complex64> = amplitudes.iter().map(|a| a * scale).collect();
        // |a + (b - a) x|^2 is convex in x, so the maximum sits on a node.
        let peak_intensity = amplitudes.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        let mode = Self {
            kind: ModeKind::Sampled {
                start,
                step,
                amplitudes,
            },
            raw_norm,
            peak_intensity,
            label: None,
        };
        let rms = mode.intensity_rms_width();
        if step > rms / MIN_SAMPLES_PER_WIDTH {
            return Err(Error::domain(format!(
                "sampled mode grid spacing {step:e} s exceeds r.m.s. width / {MIN_SAMPLES_PER_WIDTH} ({:e} s)",
                rms / MIN_SAMPLES_PER_WIDTH
            )));
        }
        Ok(mode)
    }

    /// Tabulates `f` on `points` uniformly spaced nodes spanning `[lo, hi]`.
    pub fn sampled_from_fn(
        lo: f64,
        hi: f64,
        points: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let step = (hi - lo) / (points.max(2) - 1) as f64;
        let amps = (0..points).map(|i| f(lo + i as f64 * step)).collect();
        Self::sampled(lo, step, amps)
    }

    /// Reads `t,Re(v),Im(v)` rows (header optional). The time column must be
    /// uniformly spaced.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                index: 0,
                message: e.to_string(),
            })?;
        let mut times = Vec::new();
        let mut amps = Vec::new();
        for (index, record) in reader.records().enumerate() {
            let bad = |message: String| Error::Format {
                path: path.to_path_buf(),
                index,
                message,
            };
            let record = record.map_err(|e| bad(e.to_string()))?;
            let parsed: Vec<Option<f64>> = record.iter().map(|f| f.parse().ok()).collect();
            match parsed.as_slice() {
                [Some(t), Some(re), Some(im)] => {
                    times.push(*t);
                    amps.push(Complex64::new(*re, *im));
                }
                [Some(t), Some(re)] => {
                    times.push(*t);
                    amps.push(Complex64::new(*re, 0.0));
                }
                _ if index == 0 => continue,
                _ => return Err(bad(format!("cannot parse `{}`", record.as_slice()))),
            }
        }
        if times.len() < 3 {
            return Err(Error::domain("sampled mode needs at least 3 grid points"));
        }
        let step = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    index: i + 1,
                    message: "time grid is not uniform".into(),
                });
            }
        }
        let mut mode = Self::sampled(times[0], step, amps)?;
        mode.label = Some(format!("sampled:{}", path.display()));
        Ok(mode)
    }

    pub fn kind(&self) -> &ModeKind {
        &self.kind
    }

    /// `integral |v|^2 dt` of the mode before normalization.
    pub fn raw_normalization(&self) -> f64 {
        self.raw_norm
    }

    /// Characteristic width: the amplitude s.d. for parametric modes, the
    /// autocorrelation r.m.s. width for sampled ones. For a Gaussian both
    /// coincide.
    pub fn width(&self) -> f64 {
        match self.kind {
            ModeKind::Gaussian { width, .. } | ModeKind::HermiteGauss { width, .. } => width,
            ModeKind::Sampled { .. } => self.autocorrelation_width(),
        }
    }

    /// Normalized amplitude `v(t)`.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        match &self.kind {
            ModeKind::Gaussian { width, center } => {
                Complex64::new(hermite_function(0, (t - center) / width) / width.sqrt(), 0.0)
            }
            ModeKind::HermiteGauss {
                order,
                width,
                center,
            } => Complex64::new(
                hermite_function(*order, (t - center) / width) / width.sqrt(),
                0.0,
            ),
            ModeKind::Sampled {
                start,
                step,
                amplitudes,
            } => {
                let x = (t - start) / step;
                if !(x >= 0.0) || x > (amplitudes.len() - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let i = (x.floor() as usize).min(amplitudes.len() - 2);
                let frac = x - i as f64;
                amplitudes[i] * (1.0 - frac) + amplitudes[i + 1] * frac
            }
        }
    }

    /// `|v(t)|^2`, a unit-area density in `t`.
    pub fn intensity(&self, t: f64) -> f64 {
        match &self.kind {
            ModeKind::Gaussian { width, center } => {
                let x = (t - center) / width;
                (-x * x).exp() / (width * PI.sqrt())
            }
            _ => self.amplitude(t).norm_sqr(),
        }
    }

    /// Interval outside which the intensity is treated as zero.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            ModeKind::Gaussian { width, center } => {
                (center - SPAN_WIDTHS * width, center + SPAN_WIDTHS * width)
            }
            ModeKind::HermiteGauss {
                order,
                width,
                center,
            } => {
                let half = (SPAN_WIDTHS - 1.0 + (2.0 * *order as f64 + 1.0).sqrt()) * width;
                (center - half, center + half)
            }
            ModeKind::Sampled {
                start,
                step,
                amplitudes,
            } => (*start, start + step * (amplitudes.len() - 1) as f64),
        }
    }

    fn quadrature_step(&self) -> f64 {
        match &self.kind {
            ModeKind::Gaussian { width, .. } | ModeKind::HermiteGauss { width, .. } => {
                width / STEPS_PER_WIDTH
            }
            ModeKind::Sampled { step, .. } => step / STEPS_PER_SAMPLE,
        }
    }

    /// `integral |v(t)|^2 g(t) dt`.
    fn intensity_moment(&self, g: impl Fn(f64) -> f64) -> f64 {
        match &self.kind {
            ModeKind::Sampled {
                start,
                step,
                amplitudes,
            } => (0..amplitudes.len() - 1)
                .map(|i| {
                    let a = start + i as f64 * step;
                    gauss_legendre3(|t| self.intensity(t) * g(t), a, a + step)
                })
                .sum(),
            _ => {
                let (lo, hi) = self.support();
                simpson_step(|t| self.intensity(t) * g(t), lo, hi, self.quadrature_step())
            }
        }
    }

    fn intensity_rms_width(&self) -> f64 {
        let mean = self.intensity_moment(|t| t);
        self.intensity_moment(|t| (t - mean) * (t - mean)).sqrt()
    }

    /// `eta(tau) = integral |v(t+tau)|^2 |v(t)|^2 dt` by composite Simpson.
    pub fn eta_numeric(&self, tau: f64) -> f64 {
        let (lo, hi) = self.support();
        let a = lo.max(lo - tau);
        let b = hi.min(hi - tau);
        if b <= a {
            return 0.0;
        }
        simpson_step(
            |t| self.intensity(t + tau) * self.intensity(t),
            a,
            b,
            self.quadrature_step(),
        )
    }

    /// R.m.s. width of eta(tau). eta is the density of the difference of two
    /// independent draws from `|v|^2`, so its variance is twice the intensity
    /// variance.
    pub fn autocorrelation_width(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.intensity_rms_width()
    }

    pub fn eta_profile(&self, taus: &[f64]) -> EtaProfile {
        EtaProfile {
            taus: taus.to_vec(),
            values: taus.iter().map(|&t| self.eta_numeric(t)).collect(),
        }
    }

    /// Draws an arrival time from `|v(t)|^2`: exact normal draw for the
    /// Gaussian mode, rejection from a uniform envelope otherwise.
    pub fn sample_arrival<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            ModeKind::Gaussian { width, center } => {
                let normal = Normal::new(*center, width / std::f64::consts::SQRT_2)
                    .expect("validated width");
                normal.sample(rng)
            }
            _ => {
                let (lo, hi) = self.support();
                loop {
                    let t = lo + (hi - lo) * rng.random::<f64>();
                    if rng.random::<f64>() * self.peak_intensity < self.intensity(t) {
                        return t;
                    }
                }
            }
        }
    }
}

/// Normalized Hermite function `psi_n(x)` by the stable three-term recursion.
fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let k = k as f64;
        let next = (2.0 / (k + 1.0)).sqrt() * x * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed form of eta for a Gaussian mode of amplitude s.d. `width`.
pub fn eta_gaussian(width: f64, tau: f64) -> Result<f64> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::domain("pulse width must be positive"));
    }
    Ok((-tau * tau / (2.0 * width * width)).exp() / ((2.0 * PI).sqrt() * width))
}

impl fmt::Display for TemporalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(label) = &self.label {
            return f.write_str(label);
        }
        let center = |f: &mut fmt::Formatter<'_>, c: f64| {
            if c != 0.0 {
                write!(f, "@{c}")
            } else {
                Ok(())
            }
        };
        match &self.kind {
            ModeKind::Gaussian { width, center: c } => {
                write!(f, "gauss:{width}")?;
                center(f, *c)
            }
            ModeKind::HermiteGauss {
                order,
                width,
                center: c,
            } => {
                write!(f, "hg:{order}:{width}")?;
                center(f, *c)
            }
            ModeKind::Sampled { .. } => f.write_str("sampled"),
        }
    }
}

impl FromStr for TemporalMode {
    type Err = Error;

    /// Parses `gauss:<width>[@<t0>]`, `hg:<j>:<width>[@<t0>]` or
    /// `sampled:<csv path>`.
    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |msg: &str| Error::config("mode", format!("`{spec}`: {msg}"));
        let (kind, arg) = spec.split_once(':').ok_or_else(|| bad("expected <kind>:<value>"))?;
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("invalid number"));
        let width_center = |s: &str| -> Result<(f64, f64)> {
            match s.split_once('@') {
                Some((w, c)) => Ok((number(w)?, number(c)?)),
                None => Ok((number(s)?, 0.0)),
            }
        };
        let mode = match kind.trim() {
            "gauss" => {
                let (w, c) = width_center(arg)?;
                TemporalMode::gaussian(w, c)
            }
            "hg" => {
                let (order, rest) = arg
                    .split_once(':')
                    .ok_or_else(|| bad("expected hg:<order>:<width>"))?;
                let order = order
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad("order must be a nonnegative integer"))?;
                let (w, c) = width_center(rest)?;
                TemporalMode::hermite_gauss(order, w, c)
            }
            "sampled" => TemporalMode::from_csv(Path::new(arg.trim())),
            other => return Err(bad(&format!("unknown mode kind `{other}`"))),
        };
        mode.map_err(|e| match e {
            Error::Domain(msg) => Error::config("mode", format!("`{spec}`: {msg}")),
            other => other,
        })
    }
}

/// eta(tau) tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaProfile {
    pub taus: Vec<f64>,
    pub values: Vec<f64>,
}

impl EtaProfile {
    /// Two columns, `tau_seconds,eta_per_second`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_seconds", "eta_per_second"])?;
        for (t, v) in self.taus.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()
    }
}

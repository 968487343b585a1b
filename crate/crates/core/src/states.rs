//! Single-mode quantum states described by their photon-number distribution.
//!
//! Only the diagonal of the density matrix is kept. Every quantity computed
//! downstream (mean photon number, second factorial moment, g2) depends on
//! the state through `P_n` alone.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Tail of `sum n^2 P_n` left out by truncation, relative to `max(1, <n(n-1)>)`.
const TAIL_TOLERANCE: f64 = 1e-16;

/// Hard cap on the retained photon number for parametric states.
const MAX_CUTOFF: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Coherent { mean_n: f64 },
    Thermal { mean_n: f64 },
    Fock { n: usize },
    Mixture(Vec<(f64, QuantumState)>),
    /// An arbitrary distribution, e.g. a measured histogram.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    kind: StateKind,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    factorial2: f64,
    renormalized: bool,
    label: Option<String>,
}

impl QuantumState {
    pub fn coherent(mean_n: f64) -> Result<Self> {
        check_mean(mean_n)?;
        // log P_{n+1} = log P_n + log(mu / (n+1))
        let probs = truncated_distribution(-mean_n, |n| (mean_n / (n as f64 + 1.0)).ln(), |n| {
            mean_n / (n as f64 + 2.0)
        })?;
        Ok(Self::build(
            StateKind::Coherent { mean_n },
            probs,
            mean_n,
            mean_n * mean_n,
        ))
    }

    pub fn thermal(mean_n: f64) -> Result<Self> {
        check_mean(mean_n)?;
        let ratio = mean_n / (1.0 + mean_n);
        let probs = truncated_distribution(-(1.0 + mean_n).ln(), |_| ratio.ln(), |_| ratio)?;
        Ok(Self::build(
            StateKind::Thermal { mean_n },
            probs,
            mean_n,
            2.0 * mean_n * mean_n,
        ))
    }

    pub fn fock(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        let nf = n as f64;
        Self::build(StateKind::Fock { n }, probs, nf, nf * (nf - 1.0).max(0.0))
    }

    /// The vacuum. Constructible, but every g2 operation rejects it.
    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    /// Weighted mixture of states. Weights must be nonnegative and not all
    /// zero; they are rescaled to sum to one.
    pub fn mixture(components: Vec<(f64, QuantumState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        if components.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::domain("mixture weights sum to zero"));
        }
        let components: Vec<(f64, QuantumState)> =
            components.into_iter().map(|(w, s)| (w / total, s)).collect();

        let len = components.iter().map(|(_, s)| s.probs.len()).max().unwrap_or(1);
        let mut probs = vec![0.0; len];
        let (mut mean, mut factorial2) = (0.0, 0.0);
        for (w, s) in &components {
            for (p, q) in probs.iter_mut().zip(&s.probs) {
                *p += w * q;
            }
            mean += w * s.mean;
            factorial2 += w * s.factorial2;
        }
        let renormalized = (total - 1.0).abs() > 1e-12;
        let mut state = Self::build(StateKind::Mixture(components), probs, mean, factorial2);
        state.renormalized = renormalized;
        Ok(state)
    }

    /// A state from raw weights indexed by photon number. Unnormalized input
    /// is accepted and rescaled; [`QuantumState::was_renormalized`] reports it.
    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("photon-number distribution is empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain(
                "photon-number distribution entries must be finite and nonnegative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::domain("photon-number distribution sums to zero"));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let (mean, factorial2) = moments(&probs);
        let mut state = Self::build(StateKind::Custom, probs, mean, factorial2);
        state.renormalized = (total - 1.0).abs() > 1e-12;
        Ok(state)
    }

    /// Reads a two-column `n,P_n` CSV. A header row is allowed; missing
    /// photon numbers are zero.
    pub fn from_pn_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut weights = Vec::new();
        for (index, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let bad = |message: String| Error::Format {
                path: path.to_path_buf(),
                index,
                message,
            };
            if record.len() != 2 {
                return Err(bad(format!("expected 2 columns, found {}", record.len())));
            }
            let (Ok(n), Ok(p)) = (record[0].parse::<usize>(), record[1].parse::<f64>()) else {
                if index == 0 {
                    continue;
                }
                return Err(bad(format!("cannot parse `{}`", record.as_slice())));
            };
            if n >= weights.len() {
                weights.resize(n + 1, 0.0);
            }
            weights[n] += p;
        }
        let mut state = Self::custom(weights)?;
        state.label = Some(format!("pn:{}", path.display()));
        Ok(state)
    }

    fn build(kind: StateKind, probs: Vec<f64>, mean: f64, factorial2: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self {
            kind,
            probs,
            cdf,
            mean,
            factorial2,
            renormalized: false,
            label: None,
        }
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    /// `P_n` for `n = 0..=truncation_cutoff()`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn truncation_cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    /// `sum n P_n`. Exact (not truncated) for parametric states.
    pub fn mean_photon_number(&self) -> f64 {
        self.mean
    }

    /// `sum n(n-1) P_n`. Exact (not truncated) for parametric states.
    pub fn second_factorial_moment(&self) -> f64 {
        self.factorial2
    }

    pub fn g2q_from_moments(&self) -> Result<f64> {
        if self.mean <= 0.0 {
            return Err(Error::domain("g2 undefined for vacuum"));
        }
        Ok(self.factorial2 / (self.mean * self.mean))
    }

    /// Inverse-CDF draw of a photon number.
    pub fn sample_photon_number<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let StateKind::Fock { n } = self.kind {
            return n;
        }
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1)
    }

    /// The state after each photon independently survives with probability
    /// `survival`.
    pub fn thinned(&self, survival: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival) {
            return Err(Error::domain("survival probability must lie in [0, 1]"));
        }
        let mut state = Self::custom(binomial_thinning(&self.probs, survival))?;
        state.label = Some(format!("thinned({self},{survival})"));
        Ok(state)
    }
}

impl fmt::Display for QuantumState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(label) = &self.label {
            return f.write_str(label);
        }
        match &self.kind {
            StateKind::Coherent { mean_n } => write!(f, "coherent:{mean_n}"),
            StateKind::Thermal { mean_n } => write!(f, "thermal:{mean_n}"),
            StateKind::Fock { n } => write!(f, "fock:{n}"),
            StateKind::Mixture(parts) => {
                f.write_str("mix:")?;
                for (i, (w, s)) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{w}*{s}")?;
                }
                Ok(())
            }
            StateKind::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for QuantumState {
    type Err = Error;

    /// Parses `coherent:<mean>`, `thermal:<mean>`, `fock:<n>`,
    /// `mix:<w1>*<spec1>+<w2>*<spec2>...` or `pn:<csv path>`.
    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |msg: &str| Error::config("state", format!("`{spec}`: {msg}"));
        let (kind, arg) = spec.split_once(':').ok_or_else(|| bad("expected <kind>:<value>"))?;
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("invalid number"));
        match kind.trim() {
            "coherent" => QuantumState::coherent(number(arg)?),
            "thermal" => QuantumState::thermal(number(arg)?),
            "fock" => arg
                .trim()
                .parse::<usize>()
                .map(QuantumState::fock)
                .map_err(|_| bad("photon number must be a nonnegative integer")),
            "mix" => {
                let mut parts = Vec::new();
                for term in split_mixture_terms(arg) {
                    let (w, inner) = term
                        .split_once('*')
                        .ok_or_else(|| bad("mixture terms look like <weight>*<state>"))?;
                    if inner.trim_start().starts_with("mix:") {
                        return Err(bad("nested mixtures are not supported"));
                    }
                    parts.push((number(w)?, inner.parse::<QuantumState>()?));
                }
                QuantumState::mixture(parts)
            }
            "pn" => QuantumState::from_pn_csv(Path::new(arg.trim())),
            other => Err(bad(&format!("unknown state kind `{other}`"))),
        }
        .map_err(|e| match e {
            Error::Domain(msg) => Error::config("state", format!("`{spec}`: {msg}")),
            other => other,
        })
    }
}

/// Splits `0.5*fock:1+0.5*coherent:1e+2` at the `+` signs that start a new
/// `<weight>*` term, leaving exponent signs alone.
fn split_mixture_terms(arg: &str) -> Vec<&str> {
    let mut terms = Vec::new();
    let mut start = 0;
    for (i, c) in arg.char_indices() {
        if c != '+' || i == start {
            continue;
        }
        let rest = &arg[i + 1..];
        let starts_term = rest
            .split_once('*')
            .is_some_and(|(w, _)| w.trim().parse::<f64>().is_ok());
        let prev = arg[..i].chars().next_back();
        if starts_term && !matches!(prev, Some('e' | 'E')) {
            terms.push(&arg[start..i]);
            start = i + 1;
        }
    }
    terms.push(&arg[start..]);
    terms
}

fn check_mean(mean_n: f64) -> Result<()> {
    if !mean_n.is_finite() || mean_n < 0.0 {
        return Err(Error::domain("mean photon number must be finite and nonnegative"));
    }
    Ok(())
}

/// Builds `P_0..P_c` from a log-space recursion and truncates once the
/// remaining tail of `n^2 P_n` is negligible, then renormalizes.
///
/// `log_step(n)` is `log(P_{n+1}/P_n)`; `ratio_bound(n)` bounds
/// `P_{m+1}/P_m` for every `m > n` and is used for a geometric tail bound.
fn truncated_distribution(
    log_p0: f64,
    log_step: impl Fn(usize) -> f64,
    ratio_bound: impl Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    let mut probs = Vec::new();
    let mut log_p = log_p0;
    let mut second = 0.0_f64;
    for n in 0..MAX_CUTOFF {
        let p = log_p.exp();
        probs.push(p);
        let nf = n as f64;
        second += nf * nf * p;
        // Bound on sum_{m>n} m^2 P_m: first term times a geometric series whose
        // ratio also absorbs the growth of m^2.
        let next = (log_p + log_step(n)).exp();
        let growth = ((nf + 2.0) / (nf + 1.0)).powi(2);
        let q = ratio_bound(n) * growth;
        if q < 1.0 {
            let tail = next * (nf + 1.0).powi(2) / (1.0 - q);
            if tail < TAIL_TOLERANCE * second.max(1.0) && next < TAIL_TOLERANCE {
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= total);
                return Ok(probs);
            }
        }
        log_p += log_step(n);
    }
    Err(Error::domain("photon-number distribution too wide to truncate"))
}

fn moments(probs: &[f64]) -> (f64, f64) {
    probs.iter().enumerate().fold((0.0, 0.0), |(m, f2), (n, p)| {
        let n = n as f64;
        (m + n * p, f2 + n * (n - 1.0) * p)
    })
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

/// `P'_k = sum_n P_n C(n,k) s^k (1-s)^(n-k)`.
pub fn binomial_thinning(probs: &[f64], survival: f64) -> Vec<f64> {
    let mut out = vec![0.0; probs.len()];
    if survival >= 1.0 {
        out.copy_from_slice(probs);
        return out;
    }
    if survival <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    let (ls, lf) = (survival.ln(), (1.0 - survival).ln());
    for (n, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let lp = p.ln() + ln_factorial(n);
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            let log_term =
                lp - ln_factorial(k) - ln_factorial(n - k) + k as f64 * ls + (n - k) as f64 * lf;
            *slot += log_term.exp();
        }
    }
    out
}

/// `sum n(n-1) P_n / (sum n P_n)^2` for a measured or tabulated distribution.
pub fn g2q_from_pn(probs: &[f64]) -> Result<f64> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::domain("probabilities must be finite and nonnegative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "photon-number distribution not normalized (sum = {total})"
        )));
    }
    let (mean, factorial2) = moments(probs);
    if mean <= 0.0 {
        return Err(Error::domain("g2 undefined for vacuum"));
    }
    Ok(factorial2 / (mean * mean))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::Format {
            path: path.to_path_buf(),
            index: e.position().map_or(0, |p| p.record() as usize),
            message: e.to_string(),
        },
    }
}

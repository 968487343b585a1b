//! `pulsed-g2`: simulate click streams, analyze them, emit figure datasets
//! and run the acceptance suite.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O or file
//! format error, 3 estimation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pulsed_g2::acceptance::{run_all, AcceptanceConfig};
use pulsed_g2::config::{ExperimentConfig, RunSpec};
use pulsed_g2::estimate::{analyze_pulsed, analyze_stationary, expected_histogram, AnalysisOptions};
use pulsed_g2::figures::{figure, FigureOptions};
use pulsed_g2::io::{read_stream, write_histogram_csv, write_json, write_stationary_curve_csv, write_stream};
use pulsed_g2::simulate::ClickStream;
use pulsed_g2::{Error, QuantumState, TemporalMode};

#[derive(Parser)]
#[command(name = "pulsed-g2", version, about = "Second-order coherence of pulsed and stationary light")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a click stream and write it with its metadata sidecar.
    Simulate(Common),
    /// Estimate g2 from a stream; writes a JSON report and a histogram CSV.
    Analyze {
        /// Stream file (`.csv` or `.bin`, sidecar `<file>.json` alongside).
        stream: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write the dataset behind figure 1, 2, 3 or 4 as CSV.
    Figure {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=4))]
        id: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance suite on reduced samples.
    Selftest {
        /// Fraction of the full sample sizes.
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of pulses (pulsed runs).
    #[arg(long)]
    pulses: Option<u64>,
    /// State spec, e.g. `thermal:0.5`, `fock:2`.
    #[arg(long)]
    state: Option<String>,
    /// Mode spec, e.g. `gauss:1e-9`.
    #[arg(long)]
    mode: Option<String>,
    /// Output file (simulate) or directory (analyze, figure).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Histogram bin width in seconds.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Histogram range in seconds.
    #[arg(long)]
    max_tau: Option<f64>,
}

impl Common {
    /// Merges flags over the config file. `source` also overrides the
    /// configured state and mode; analysis passes false because a mode hint
    /// need not fit the configured pulse period.
    fn load(&self, source: bool) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = Some(threads);
        }
        if source {
            if let Some(state) = &self.state {
                cfg.source.state = state.clone();
            }
            if let Some(mode) = &self.mode {
                cfg.source.mode = mode.clone();
            }
        }
        if let Some(n) = self.pulses {
            match &mut cfg.run {
                RunSpec::Pulsed { pulses, .. } => *pulses = n,
                RunSpec::Stationary { .. } => {
                    return Err(config_error("--pulses", "only applies to pulsed runs"))
                }
            }
        }
        if self.bin_width.is_some() {
            cfg.estimator.bin_width = self.bin_width;
        }
        if self.max_tau.is_some() {
            cfg.estimator.max_tau = self.max_tau;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn config_error(field: &str, message: &str) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 1,
        Error::Io { .. } | Error::Format { .. } => 2,
        Error::Estimation(_) | Error::Domain(_) => 3,
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error("threads", &e.to_string()))?;
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
        }
        _ => Ok(()),
    }
}

fn simulate(common: &Common) -> Result<(), Error> {
    let cfg = common.load(true)?;
    set_threads(cfg.threads)?;
    let stream = cfg.simulate()?;
    let out = common.out.clone().unwrap_or(cfg.output.stream.clone());
    ensure_parent(&out)?;
    write_stream(&stream, &out)?;
    println!("wrote {} clicks to {}", stream.len(), out.display());
    Ok(())
}

/// Flag first, then the config file, then the stream's own metadata.
fn pick<T>(
    flag: Option<&String>,
    configured: Option<&String>,
    recorded: Option<&String>,
    parse: impl Fn(&str) -> Result<T, Error>,
) -> Result<Option<T>, Error> {
    if let Some(s) = flag.or(configured) {
        return parse(s).map(Some);
    }
    // Recorded specs may name files that no longer exist; ignore them then.
    Ok(recorded.and_then(|s| parse(s).ok()))
}

fn analyze(stream_path: &Path, common: &Common) -> Result<(), Error> {
    let cfg = common.load(false)?;
    set_threads(cfg.threads)?;
    let stream = read_stream(stream_path)?;
    let (report_path, hist_path) = match &common.out {
        Some(dir) => (
            dir.join(file_name(&cfg.output.report)),
            dir.join(file_name(&cfg.output.histogram)),
        ),
        None => (cfg.output.report.clone(), cfg.output.histogram.clone()),
    };
    ensure_parent(&report_path)?;
    ensure_parent(&hist_path)?;
    let from_file = common.config.is_some();

    if !stream.is_pulsed() {
        let (report, curve) = analyze_stationary(
            &stream,
            cfg.estimator.bin_width,
            cfg.estimator.max_tau,
            &cfg.bootstrap(),
        )?;
        write_json(&report, &report_path)?;
        write_stationary_curve_csv(&curve, &hist_path)?;
        println!(
            "peak/baseline {:.4} +- {:.4}; report {}",
            report.peak_ratio,
            report.peak_ratio_sigma,
            report_path.display()
        );
        return Ok(());
    }

    let mode = pick(
        common.mode.as_ref(),
        from_file.then_some(&cfg.source.mode),
        stream.metadata.mode.as_ref(),
        |s| s.parse::<TemporalMode>(),
    )?;
    let state = pick(
        common.state.as_ref(),
        from_file.then_some(&cfg.source.state),
        stream.metadata.state.as_ref(),
        |s| s.parse::<QuantumState>(),
    )?;
    let opts = AnalysisOptions {
        bin_width: cfg.estimator.bin_width,
        max_tau: cfg.estimator.max_tau,
        mode_hint: mode.clone().filter(|_| cfg.estimator.use_mode_hint),
        state: state.clone(),
        bootstrap: cfg.bootstrap(),
    };
    let (report, hist) = analyze_pulsed(&stream, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let expected = match (&state, &mode) {
        (Some(s), Some(m)) => expected_histogram(s, &stream.metadata.detector, m, &hist),
        _ => None,
    };
    write_json(&report, &report_path)?;
    write_histogram_csv(&hist, expected.as_deref(), &hist_path)?;
    print_summary(&stream, &report, &report_path);
    Ok(())
}

fn print_summary(stream: &ClickStream, report: &pulsed_g2::estimate::CoherenceReport, path: &Path) {
    let show = |v: Option<f64>, s: Option<f64>| match (v, s) {
        (Some(v), Some(s)) => format!("{v:.4} +- {s:.4}"),
        _ => "n/a".into(),
    };
    println!(
        "{} clicks over {} pulses; g2q (eta) {}; g2q (photon number) {}; report {}",
        stream.len(),
        report.n,
        show(report.g2q_eta, report.g2q_eta_sigma),
        show(report.g2q_pn, report.g2q_pn_sigma),
        path.display()
    );
    if !report.flags.is_empty() {
        println!("flags: {}", report.flags.join(", "));
    }
}

fn file_name(path: &Path) -> PathBuf {
    path.file_name().map(PathBuf::from).unwrap_or_else(|| path.to_path_buf())
}

fn run_figure(id: u32, common: &Common) -> Result<(), Error> {
    let cfg = common.load(true)?;
    set_threads(cfg.threads)?;
    let configured = common.config.is_some();
    let opts = FigureOptions {
        seed: cfg.seed,
        pulses: common.pulses,
        state: (configured || common.state.is_some())
            .then(|| cfg.state())
            .transpose()?,
        mode: (configured || common.mode.is_some())
            .then(|| cfg.mode())
            .transpose()?,
        efficiency: configured.then_some(cfg.detector.efficiency),
        bin_width: cfg.estimator.bin_width,
        max_tau: cfg.estimator.max_tau,
    };
    let table = figure(id, &opts)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join(format!("figure{id}.csv"));
    table.write_csv(&path)?;
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}

fn selftest(scale: f64, seed: Option<u64>, threads: Option<usize>) -> Result<bool, Error> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(config_error("--scale", "must lie in (0, 1]"));
    }
    set_threads(threads)?;
    let mut cfg = AcceptanceConfig {
        scale,
        ..Default::default()
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let outcomes = run_all(&cfg);
    for o in &outcomes {
        println!("{o}");
    }
    Ok(outcomes.iter().all(|o| o.passed()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate(common) => simulate(common),
        Command::Analyze { stream, common } => analyze(stream, common),
        Command::Figure { id, common } => run_figure(*id, common),
        Command::Selftest {
            scale,
            seed,
            threads,
        } => match selftest(*scale, *seed, *threads) {
            Ok(true) => Ok(()),
            Ok(false) => Err(Error::Estimation("acceptance criteria failed".into())),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

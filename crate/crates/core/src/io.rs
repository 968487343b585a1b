//! Click-stream, histogram and report files.
//!
//! A stream is stored as either CSV (`pulse_index,time_seconds`, the pulse
//! field empty for stationary light) or a binary file of 16-byte records
//! (little-endian `u64` pulse index, `u64::MAX` for none, then `f64` time).
//! Both carry a JSON sidecar, `<file>.json`, holding the [`StreamMetadata`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{StationaryCurve, TauHistogram};
use crate::simulate::{Click, ClickStream, StreamMetadata};

pub const STREAM_HEADER: [&str; 2] = ["pulse_index", "time_seconds"];
const NO_PULSE: u64 = u64::MAX;
const RECORD_BYTES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Csv,
    Binary,
}

impl StreamFormat {
    /// `.bin` files are binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => StreamFormat::Binary,
            _ => StreamFormat::Csv,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn format_error(path: &Path, index: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        index,
        message: message.into(),
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn read_metadata(path: &Path) -> Result<StreamMetadata> {
    let sidecar = sidecar_path(path);
    serde_json::from_reader(open(&sidecar)?).map_err(|e| format_error(&sidecar, 0, e.to_string()))
}

/// Writes the stream and its sidecar in the format given by the extension.
pub fn write_stream(stream: &ClickStream, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    match StreamFormat::from_path(path) {
        StreamFormat::Csv => {
            writeln!(out, "{}", STREAM_HEADER.join(",")).map_err(io)?;
            for c in &stream.clicks {
                match c.pulse {
                    Some(p) => writeln!(out, "{p},{}", c.time),
                    None => writeln!(out, ",{}", c.time),
                }
                .map_err(io)?;
            }
        }
        StreamFormat::Binary => {
            for c in &stream.clicks {
                out.write_all(&c.pulse.unwrap_or(NO_PULSE).to_le_bytes())
                    .and_then(|_| out.write_all(&c.time.to_le_bytes()))
                    .map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)?;
    write_json(&stream.metadata, &sidecar_path(path))
}

/// Reads a stream written by [`write_stream`]. Malformed or out-of-order
/// records are reported with their zero-based record index.
pub fn read_stream(path: &Path) -> Result<ClickStream> {
    let metadata = read_metadata(path)?;
    let clicks = match StreamFormat::from_path(path) {
        StreamFormat::Csv => read_csv_clicks(path)?,
        StreamFormat::Binary => read_binary_clicks(path)?,
    };
    let stream = ClickStream { clicks, metadata };
    stream
        .validate()
        .map_err(|(index, message)| format_error(path, index, message))?;
    Ok(stream)
}

fn read_csv_clicks(path: &Path) -> Result<Vec<Click>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(open(path)?);
    let headers = reader
        .headers()
        .map_err(|e| format_error(path, 0, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != STREAM_HEADER {
        return Err(format_error(
            path,
            0,
            format!("expected header `{}`", STREAM_HEADER.join(",")),
        ));
    }
    let mut clicks = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_error(path, index, e.to_string()))?;
        let bad = |what: &str| format_error(path, index, format!("invalid {what}"));
        let pulse = match record.get(0).map(str::trim) {
            Some("") => None,
            Some(p) => Some(p.parse().map_err(|_| bad("pulse_index"))?),
            None => return Err(bad("record")),
        };
        let time = record
            .get(1)
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| bad("time_seconds"))?;
        clicks.push(Click { pulse, time });
    }
    Ok(clicks)
}

fn read_binary_clicks(path: &Path) -> Result<Vec<Click>> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let records = bytes.chunks_exact(RECORD_BYTES);
    if !records.remainder().is_empty() {
        return Err(format_error(
            path,
            bytes.len() / RECORD_BYTES,
            "truncated record",
        ));
    }
    Ok(records
        .map(|r| {
            let pulse = u64::from_le_bytes(r[..8].try_into().expect("8 bytes"));
            let time = f64::from_le_bytes(r[8..].try_into().expect("8 bytes"));
            Click {
                pulse: (pulse != NO_PULSE).then_some(pulse),
                time,
            }
        })
        .collect())
}

/// `tau_seconds,count,expected_analytic` at bin centers; the last column is
/// empty without an analytic model.
pub fn write_histogram_csv(
    hist: &TauHistogram,
    expected: Option<&[f64]>,
    path: &Path,
) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "tau_seconds,count,expected_analytic").map_err(io)?;
    for (i, count) in hist.counts().iter().enumerate() {
        let tau = hist.bin_center(i);
        match expected.and_then(|e| e.get(i)) {
            Some(e) => writeln!(out, "{tau},{count},{e}"),
            None => writeln!(out, "{tau},{count},"),
        }
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_stationary_curve_csv(curve: &StationaryCurve, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "tau_seconds,pair_count,conditional_probability_per_second,g2").map_err(io)?;
    for i in 0..curve.taus.len() {
        writeln!(
            out,
            "{},{},{},{}",
            curve.taus[i], curve.pair_counts[i], curve.conditional_probability[i], curve.g2[i]
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

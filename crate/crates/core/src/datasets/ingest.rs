//! Reading and writing single-channel signals.
//!
//! CSV layout: a `sample_rate_hz,<rate>` header line, then one sample per
//! line. WAV files are decoded as PCM (integer or 32-bit float); integer
//! samples are scaled by `2^(bits-1)` and channels are averaged.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::Signal;

fn source_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn ingest_csv(path: &Path) -> Result<Signal> {
    let file = std::fs::File::open(path)?;
    read_csv_signal(file, path)
}

pub fn read_csv_signal<R: std::io::Read>(reader: R, path: &Path) -> Result<Signal> {
    let err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| err(1, "empty file".into()))?
        .map_err(|e| err(1, e.to_string()))?;
    if header.len() != 2 || &header[0] != "sample_rate_hz" {
        return Err(err(1, "expected `sample_rate_hz,<rate>`".into()));
    }
    let rate: f64 = header[1]
        .parse()
        .map_err(|_| err(1, format!("bad sample rate `{}`", &header[1])))?;

    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 1 {
            return Err(err(line, format!("expected one value, found {}", rec.len())));
        }
        let v: f64 = rec[0]
            .parse()
            .map_err(|_| err(line, format!("not a number: `{}`", &rec[0])))?;
        if !v.is_finite() {
            return Err(err(line, format!("non-finite sample `{}`", &rec[0])));
        }
        samples.push(v);
    }
    Signal::new(samples, rate, source_id(path), None)
}

/// Writes the CSV layout read by [`ingest_csv`]; values round-trip exactly.
pub fn write_csv_signal<W: Write>(mut w: W, samples: &[f64], sample_rate_hz: f64) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 20 + 32);
    out.push_str(&format!("sample_rate_hz,{sample_rate_hz}\n"));
    for v in samples {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn ingest_wav(path: &Path) -> Result<Signal> {
    let unsupported = |msg: String| Error::UnsupportedEncoding {
        path: path.to_path_buf(),
        msg,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => unsupported(other.to_string()),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(unsupported("zero channels".into()));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !(1..=32).contains(&spec.bits_per_sample) {
                return Err(unsupported(format!("{}-bit integer PCM", spec.bits_per_sample)));
            }
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unsupported(e.to_string()))?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(unsupported(format!("{}-bit float PCM", spec.bits_per_sample)));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unsupported(e.to_string()))?
        }
    };
    let samples: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    Signal::new(samples, spec.sample_rate as f64, source_id(path), None)
}

/// Dispatches on extension: `.wav` goes to [`ingest_wav`], anything else to
/// [`ingest_csv`].
pub fn ingest_path(path: &Path) -> Result<Signal> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(e) if e == "wav" => ingest_wav(path),
        _ => ingest_csv(path),
    }
}

/// Signal files (`.csv`, `.wav`) directly inside `dir`, sorted by name.
pub fn list_signal_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("csv" | "wav")
                )
        })
        .collect();
    files.sort();
    Ok(files)
}

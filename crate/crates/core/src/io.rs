//! Population and waveform file formats.
//!
//! Two interchangeable on-disk representations are supported:
//!
//! * **VAP1 binary** — a single ASCII header line
//!   `VAP1 channels=<int> samples=<int> fs=<float>` terminated by `\n`,
//!   followed by channels × samples little-endian `f64` values in row-major
//!   order (channel 1 first). Lossless for `f64` data.
//! * **CSV** — a `# fs=<Hz>` comment line followed by one comma-separated row
//!   per channel. Values are written with Rust's shortest round-trip float
//!   formatting, so CSV round-trips are also bitwise lossless. Additional
//!   `#` comment lines (for example an embedded config hash) are permitted
//!   and skipped on read.
//!
//! Neither format carries the CF axis; loaders attach the standard Greenwood
//! map for the file's channel count (see [`crate::frontend::ChannelMap`]).

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::ChannelMap;
use crate::population::PopulationResponse;
use crate::sample::Sample;

/// On-disk representation for population matrices and waveforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// VAP1 binary (header line + little-endian f64 payload).
    Vap1,
    /// Comma-separated rows with a `# fs=` comment header.
    Csv,
}

impl MatrixFormat {
    /// Stable lower-case name used by the CLI and config files.
    pub fn name(self) -> &'static str {
        match self {
            MatrixFormat::Vap1 => "vap1",
            MatrixFormat::Csv => "csv",
        }
    }

    /// Parse the CLI/config spelling of a format.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vap1" => Ok(MatrixFormat::Vap1),
            "csv" => Ok(MatrixFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown matrix format '{other}' (expected vap1 or csv)"
            ))),
        }
    }

    /// Conventional file extension.
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Vap1 => "vap1",
            MatrixFormat::Csv => "csv",
        }
    }
}

/// Store a population response at `path` in the given format.
pub fn store_population<S: Sample>(
    path: &Path,
    format: MatrixFormat,
    pop: &PopulationResponse<S>,
) -> Result<()> {
    match format {
        MatrixFormat::Vap1 => {
            let mut w = Vap1Writer::create(path, pop.n_channels(), pop.n_samples(), pop.fs())?;
            for row in pop.rows() {
                w.write_row(row)?;
            }
            w.finish()
        }
        MatrixFormat::Csv => {
            let file = fs::File::create(path)?;
            let mut w = BufWriter::new(file);
            writeln!(w, "# fs={}", pop.fs().to64())?;
            for row in pop.rows() {
                write_csv_row(&mut w, row)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// Load a population response from `path`.
///
/// The CF axis is not stored on disk; the standard Greenwood map for the
/// file's channel count is attached instead.
pub fn load_population<S: Sample>(
    path: &Path,
    format: MatrixFormat,
) -> Result<PopulationResponse<S>> {
    let (fs, rows) = match format {
        MatrixFormat::Vap1 => load_vap1(path)?,
        MatrixFormat::Csv => load_csv_rows(path)?,
    };
    let n = rows.len();
    let map = ChannelMap::<S>::standard(n)?;
    let rows: Vec<Vec<S>> = rows
        .into_iter()
        .map(|row| row.into_iter().map(S::of).collect())
        .collect();
    PopulationResponse::from_rows(S::of(fs), map.cf_hz, rows)
}

/// Store a single waveform as CSV: a `# fs=` line then one value per line.
pub fn store_waveform_csv<S: Sample>(path: &Path, fs: S, x: &[S]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# fs={}", fs.to64())?;
    for v in x {
        writeln!(w, "{}", v.to64())?;
    }
    w.flush()?;
    Ok(())
}

/// Load a waveform stored by [`store_waveform_csv`]; returns `(fs, samples)`.
pub fn load_waveform_csv<S: Sample>(path: &Path) -> Result<(S, Vec<S>)> {
    let (fs, rows) = load_csv_rows(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "waveform CSV rows must hold one value, found {}",
                row.len()
            )));
        }
        out.push(S::of(row[0]));
    }
    Ok((S::of(fs), out))
}

/// Incremental VAP1 writer so long simulations can stream one channel row at
/// a time instead of materializing the whole matrix.
pub struct Vap1Writer {
    w: BufWriter<fs::File>,
    n_channels: usize,
    n_samples: usize,
    rows_written: usize,
}

impl Vap1Writer {
    /// Create the file and emit the header line.
    pub fn create<S: Sample>(
        path: &Path,
        n_channels: usize,
        n_samples: usize,
        fs: S,
    ) -> Result<Self> {
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::DimensionMismatch(
                "refusing to write a zero-sized matrix".into(),
            ));
        }
        let file = fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        write!(
            w,
            "VAP1 channels={n_channels} samples={n_samples} fs={}\n",
            fs.to64()
        )?;
        Ok(Vap1Writer {
            w,
            n_channels,
            n_samples,
            rows_written: 0,
        })
    }

    /// Append one channel row (must match the declared sample count).
    pub fn write_row<S: Sample>(&mut self, row: &[S]) -> Result<()> {
        if row.len() != self.n_samples {
            return Err(Error::DimensionMismatch(format!(
                "row length {} vs declared samples {}",
                row.len(),
                self.n_samples
            )));
        }
        if self.rows_written == self.n_channels {
            return Err(Error::DimensionMismatch(format!(
                "all {} declared rows already written",
                self.n_channels
            )));
        }
        for v in row {
            self.w.write_all(&v.to64().to_le_bytes())?;
        }
        self.rows_written += 1;
        Ok(())
    }

    /// Flush and verify all declared rows were written.
    pub fn finish(mut self) -> Result<()> {
        if self.rows_written != self.n_channels {
            return Err(Error::DimensionMismatch(format!(
                "wrote {} of {} declared rows",
                self.rows_written, self.n_channels
            )));
        }
        self.w.flush()?;
        Ok(())
    }
}

fn load_vap1(path: &Path) -> Result<(f64, Vec<Vec<f64>>)> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("no newline-terminated header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::MalformedHeader("header is not ASCII/UTF-8".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "VAP1" {
        return Err(Error::MalformedHeader(format!(
            "expected 'VAP1 channels=<int> samples=<int> fs=<float>', got '{header}'"
        )));
    }
    let n_channels = parse_field::<usize>(tokens[1], "channels")?;
    let n_samples = parse_field::<usize>(tokens[2], "samples")?;
    let fs = parse_field::<f64>(tokens[3], "fs")?;
    if n_channels == 0 || n_samples == 0 {
        return Err(Error::DimensionMismatch(format!(
            "header declares a zero-sized matrix ({n_channels} x {n_samples})"
        )));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::MalformedHeader(format!(
            "fs must be positive, got {fs}"
        )));
    }
    let payload = &bytes[nl + 1..];
    let expected = n_channels
        .checked_mul(n_samples)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::DimensionMismatch("matrix size overflows".into()))?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after the declared payload",
            payload.len() - expected
        )));
    }
    let mut rows = Vec::with_capacity(n_channels);
    let mut it = payload.chunks_exact(8);
    for _ in 0..n_channels {
        let mut row = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let chunk = it.next().expect("length verified above");
            row.push(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
        }
        rows.push(row);
    }
    Ok((fs, rows))
}

fn load_csv_rows(path: &Path) -> Result<(f64, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut fs_hz: Option<f64> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("fs=") {
                let fs: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("unparsable fs value '{v}'")))?;
                fs_hz = Some(fs);
            }
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "line {}: unparsable value '{}'",
                    lineno + 1,
                    field.trim()
                ))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::DimensionMismatch(format!(
                    "line {}: {} columns, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let fs = fs_hz.ok_or_else(|| Error::MalformedHeader("missing '# fs=<Hz>' line".into()))?;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::MalformedHeader(format!(
            "fs must be positive, got {fs}"
        )));
    }
    if rows.is_empty() {
        return Err(Error::DimensionMismatch("no data rows".into()));
    }
    Ok((fs, rows))
}

fn parse_field<T: std::str::FromStr>(token: &str, key: &str) -> Result<T> {
    token
        .strip_prefix(&format!("{key}="))
        .ok_or_else(|| Error::MalformedHeader(format!("expected '{key}=<value>', got '{token}'")))?
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("unparsable value in '{token}'")))
}

/// Write one CSV row using shortest round-trip float formatting.
fn write_csv_row<S: Sample, W: std::io::Write>(w: &mut W, row: &[S]) -> Result<()> {
    let mut first = true;
    for v in row {
        if first {
            write!(w, "{}", v.to64())?;
            first = false;
        } else {
            write!(w, ",{}", v.to64())?;
        }
    }
    writeln!(w)?;
    Ok(())
}

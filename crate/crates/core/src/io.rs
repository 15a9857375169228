//! File formats: numeric CSV, PGM images, JSON, and atomic writes.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectrumAtom;
use crate::tv1d::Signal;
use crate::tv2d::{AnisoTrajectory, Image};

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

fn with_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Rows of numbers from CSV text. Blank lines and `#` comments are skipped;
/// fields may also be separated by whitespace.
pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let at = e.position().map_or("input".to_string(), |p| format!("line {}", p.line()));
            parse_error(at, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::new();
        for (field_index, field) in record.iter().enumerate() {
            for token in field.split_whitespace() {
                let value: f64 = token.parse().map_err(|_| {
                    parse_error(
                        format!("line {line}, field {}", field_index + 1),
                        format!("{token:?} is not a number"),
                    )
                })?;
                if !value.is_finite() {
                    return Err(parse_error(
                        format!("line {line}, field {}", field_index + 1),
                        "value is not finite",
                    ));
                }
                row.push(value);
            }
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

/// A signal from CSV text: all numbers in reading order.
pub fn parse_signal_csv(text: &str) -> Result<Signal> {
    let values: Vec<f64> = parse_csv_rows(text)?.concat();
    if values.is_empty() {
        return Err(parse_error("input", "no samples"));
    }
    Signal::new(values)
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    parse_signal_csv(&fs::read_to_string(path)?).map_err(|e| with_path(path, e))
}

/// One sample per line.
pub fn format_signal_csv(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_signal_csv(path: &Path, values: &[f64]) -> Result<()> {
    write_atomic(path, format_signal_csv(values).as_bytes())
}

/// An image from CSV text, one image row per line.
pub fn parse_matrix_csv(text: &str) -> Result<Image> {
    let rows = parse_csv_rows(text)?;
    if rows.is_empty() {
        return Err(parse_error("input", "no rows"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(parse_error(
            format!("row {}", i + 1),
            format!("has {} values, the first row has {}", rows[i].len(), rows[0].len()),
        ));
    }
    Image::from_rows(&rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<Image> {
    parse_matrix_csv(&fs::read_to_string(path)?).map_err(|e| with_path(path, e))
}

pub fn format_matrix_csv(img: &Image) -> String {
    let mut out = String::new();
    for r in 0..img.rows() {
        let row: Vec<String> = img.row(r).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, img: &Image) -> Result<()> {
    write_atomic(path, format_matrix_csv(img).as_bytes())
}

/// Two-column `t,mass` table of a spectrum.
pub fn format_spectrum_csv(atoms: &[SpectrumAtom]) -> String {
    let mut out = String::from("t,mass\n");
    for a in atoms {
        let _ = writeln!(out, "{},{}", a.time, a.mass);
    }
    out
}

/// Byte cursor over a PGM header.
struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn integer(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_error(
                format!("byte {start}"),
                match self.bytes.get(start) {
                    Some(&b) => format!("expected {what}, found {:?}", b as char),
                    None => format!("expected {what}, found end of file"),
                },
            ));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_error(format!("byte {start}"), format!("{what} is out of range")))
    }
}

/// Parses a plain (P2) or raw (P5) graymap, scaling samples by `1 / maxval`.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(parse_error("byte 0", "expected the magic number P2 or P5")),
    };
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.integer("width")? as usize;
    let height = cur.integer("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.integer("maximum gray value")?;
    if width == 0 || height == 0 {
        return Err(parse_error("header", "image dimensions must be positive"));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(parse_error(
            format!("byte {maxval_at}"),
            format!("maximum gray value {maxval} outside 1..=65535"),
        ));
    }
    let n = width * height;
    let scale = f64::from(maxval);
    let mut data = Vec::with_capacity(n);
    if binary {
        if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(parse_error(format!("byte {}", cur.pos), "expected whitespace before the raster"));
        }
        let start = cur.pos + 1;
        let size = if maxval < 256 { 1 } else { 2 };
        let needed = start + n * size;
        if bytes.len() < needed {
            return Err(parse_error(
                format!("byte {}", bytes.len()),
                format!("raster truncated: expected {} bytes", n * size),
            ));
        }
        for i in 0..n {
            let at = start + i * size;
            let v = if size == 1 {
                u32::from(bytes[at])
            } else {
                u32::from(u16::from_be_bytes([bytes[at], bytes[at + 1]]))
            };
            if v > maxval {
                return Err(parse_error(format!("byte {at}"), format!("sample {v} exceeds {maxval}")));
            }
            data.push(f64::from(v) / scale);
        }
    } else {
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.integer("sample")?;
            if v > maxval {
                return Err(parse_error(format!("byte {at}"), format!("sample {v} exceeds {maxval}")));
            }
            data.push(f64::from(v) / scale);
        }
    }
    Image::new(height, width, data)
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    parse_pgm(&fs::read(path)?).map_err(|e| with_path(path, e))
}

/// Raw PGM with the given `maxval` (255 or 65535 are typical); pixels are clamped to `[0, 1]`.
pub fn encode_pgm(img: &Image, maxval: u16) -> Vec<u8> {
    let maxval = maxval.max(1);
    let mut out = format!("P5\n{} {}\n{}\n", img.cols(), img.rows(), maxval).into_bytes();
    for &v in img.data() {
        let q = (v.clamp(0.0, 1.0) * f64::from(maxval)).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(path: &Path, img: &Image, maxval: u16) -> Result<()> {
    write_atomic(path, &encode_pgm(img, maxval))
}

/// Reads a `.pgm` file as a graymap and anything else as a CSV matrix.
pub fn read_image(path: &Path) -> Result<Image> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm"));
    if is_pgm {
        read_pgm(path)
    } else {
        read_matrix_csv(path)
    }
}

/// Writes a `.pgm` path as a 16-bit graymap and anything else as a CSV matrix.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        write_pgm(path, img, u16::MAX)
    } else {
        write_matrix_csv(path, img)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        parse_error(
            format!("{}: line {}, column {}", path.display(), e.line(), e.column()),
            e.to_string(),
        )
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Index of a trajectory directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub times: Vec<f64>,
    pub frames: Vec<String>,
    pub mean: f64,
    pub delta: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Writes each frame as `frame_NNNNN.pgm` (16-bit) and the times to `index.json`.
pub fn write_trajectory_dir(dir: &Path, traj: &AnisoTrajectory) -> Result<TrajectoryIndex> {
    fs::create_dir_all(dir)?;
    let mut frames = Vec::with_capacity(traj.frames.len());
    for (i, frame) in traj.frames.iter().enumerate() {
        let name = format!("frame_{i:05}.pgm");
        write_pgm(&dir.join(&name), frame, u16::MAX)?;
        frames.push(name);
    }
    let index = TrajectoryIndex {
        times: traj.times.clone(),
        frames,
        mean: traj.mean,
        delta: traj.delta,
        steps: traj.steps.len(),
        converged: traj.converged,
    };
    write_json(&dir.join("index.json"), &index)?;
    Ok(index)
}

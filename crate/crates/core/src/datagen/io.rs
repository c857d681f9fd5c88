//! Dataset files.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! offset 0   : b"HDCB"
//! offset 4   : u32 version = 1
//! offset 8   : u64 n
//! offset 16  : u64 p
//! offset 24  : n * p f64 values, row-major
//! ```
//!
//! CSV layout: header row `x1,...,xp`, then one row per observation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::report::format_f64;

pub const MAGIC: &[u8; 4] = b"HDCB";
pub const VERSION: u32 = 1;

pub fn write_dataset_bin(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(MAGIC)?;
    write(&VERSION.to_le_bytes())?;
    write(&(ds.n() as u64).to_le_bytes())?;
    write(&(ds.p() as u64).to_le_bytes())?;
    for v in ds.values() {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset_bin(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 24];
    r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format(format!("{}: missing HDCB magic", path.display())));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported dataset version {version}",
            path.display()
        )));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes")) as usize;
    let p = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes")) as usize;
    let count = n
        .checked_mul(p)
        .filter(|c| *c < (1 << 40))
        .ok_or_else(|| Error::Format(format!("{}: implausible shape {n}x{p}", path.display())))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "{}: expected {} payload bytes, found {}",
            path.display(),
            count * 8,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Dataset::from_rows(n, p, values)
}

pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    };
    w.write_record((1..=ds.p()).map(|j| format!("x{j}")))
        .map_err(to_err)?;
    for row in ds.rows() {
        w.write_record(row.iter().map(|v| format_f64(*v)))
            .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let headers = r
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    let p = headers.len();
    for (j, h) in headers.iter().enumerate() {
        if h != format!("x{}", j + 1) {
            return Err(Error::Format(format!(
                "{}: header column {} is `{h}`, expected `x{}`",
                path.display(),
                j + 1,
                j + 1
            )));
        }
    }
    let mut values = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if rec.len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: rec.len(),
            });
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("{}: row {}: `{field}` is not a number", path.display(), n + 1))
            })?;
            values.push(v);
        }
        n += 1;
    }
    Dataset::from_rows(n, p, values)
}

/// Reads a dataset, choosing the format by extension (`.csv` or binary otherwise).
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_dataset_csv(path),
        _ => read_dataset_bin(path),
    }
}

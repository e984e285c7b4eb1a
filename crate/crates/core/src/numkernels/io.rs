//! Matrix file formats.
//!
//! `DCM1` layout: the 4 magic bytes `DCM1`, `rows` and `cols` as
//! little-endian `u64`, then `rows·cols` little-endian `f64` in row-major
//! order. Plain CSV (one matrix row per line, no header) is supported for
//! interoperability.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DCM1_MAGIC: &[u8; 4] = b"DCM1";

pub fn encode_dcm1(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.as_slice().len());
    out.extend_from_slice(DCM1_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dcm1(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 20 || &bytes[..4] != DCM1_MAGIC {
        return Err(Error::Format("missing DCM1 header".into()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("implausible shape {rows}x{cols}")))?;
    let body = &bytes[20..];
    if body.len() as u64 != n {
        return Err(Error::Format(format!(
            "{rows}x{cols} payload needs {n} bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::new(rows as usize, cols as usize, data)
}

pub fn write_dcm1(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_dcm1(m))?;
    w.flush()?;
    Ok(())
}

pub fn read_dcm1(path: impl AsRef<Path>) -> Result<Matrix> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_dcm1(&bytes)
}

pub fn write_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.rows() {
        // `{:?}` prints the shortest representation that round-trips.
        w.write_record(m.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {s:?}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

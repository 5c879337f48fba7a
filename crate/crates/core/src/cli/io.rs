//! Matrix files: the little-endian `MCAM` binary container and plain CSV.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MCAM"
//! 4       4     version, u32 LE, == 1
//! 8       8     rows, u64 LE
//! 16      8     cols, u64 LE
//! 24      8*rc  row-major f64 LE payload
//! ```

use std::fs;
use std::path::Path;

use clap::ValueEnum;

use crate::error::{McaError, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"MCAM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Row sums of an imported attention matrix may drift this far from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Mcam,
    Csv,
}

fn format_err(offset: usize, message: impl Into<String>) -> McaError {
    McaError::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn encode_mcam(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_mcam(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            bytes.len(),
            format!(
                "truncated header: expected {HEADER_LEN} bytes, got {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(format_err(0, "bad magic, expected \"MCAM\""));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if rows == 0 {
        return Err(format_err(8, "row count is zero"));
    }
    if cols == 0 {
        return Err(format_err(16, "column count is zero"));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .filter(|&n| n <= (usize::MAX - HEADER_LEN) as u64)
        .ok_or_else(|| format_err(8, format!("{rows}x{cols} payload size overflows")))?
        as usize;
    let actual = bytes.len() - HEADER_LEN;
    if actual < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes, got {actual}"),
        ));
    }
    if actual > expected {
        return Err(format_err(
            HEADER_LEN + expected,
            format!("{} trailing bytes after payload", actual - expected),
        ));
    }
    let mut data = Vec::with_capacity(expected / 8);
    for (k, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(HEADER_LEN + 8 * k, format!("non-finite value {v}")));
        }
        data.push(v);
    }
    Matrix::new(rows as usize, cols as usize, data)
}

/// Comma-separated rows, no header. Values print in shortest round-trip form.
pub fn encode_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut cols = 0;
    let mut rows = 0;
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let offset = e.position().map_or(text.len() as u64, |p| p.byte());
            McaError::Format {
                offset,
                message: e.to_string(),
            }
        })?;
        let offset = record.position().map_or(0, |p| p.byte() as usize);
        if rows == 0 {
            cols = record.len();
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| format_err(offset, format!("cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(format_err(offset, format!("non-finite value {field}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(format_err(0, "no rows"));
    }
    Matrix::new(rows, cols, data)
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let bytes = fs::read(path)?;
    match format {
        MatrixFormat::Mcam => decode_mcam(&bytes),
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes)
                .map_err(|e| format_err(e.utf8_error().valid_up_to(), "file is not UTF-8"))?;
            decode_csv(&text)
        }
    }
}

pub fn write_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Mcam => fs::write(path, encode_mcam(m))?,
        MatrixFormat::Csv => fs::write(path, encode_csv(m))?,
    }
    Ok(())
}

/// An attention matrix loaded from disk, with the rows that had to be
/// renormalized because their sums drifted past [`ROW_SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedAttention {
    pub matrix: Matrix,
    pub renormalized_rows: Vec<usize>,
}

/// Checks a matrix for use as attention: square, non-negative, and
/// row-stochastic up to renormalization.
pub fn validate_attention(m: Matrix) -> Result<ImportedAttention> {
    if m.rows() != m.cols() {
        return Err(McaError::Shape(format!(
            "attention must be square, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if let Some(pos) = m.data().iter().position(|&v| v < 0.0) {
        return Err(McaError::Domain(format!(
            "negative attention {} at row {}, col {}",
            m.data()[pos],
            pos / m.cols(),
            pos % m.cols()
        )));
    }
    let mut m = m;
    let mut renormalized_rows = Vec::new();
    for i in 0..m.rows() {
        let sum: f64 = m.row(i).iter().sum();
        if sum <= 0.0 {
            return Err(McaError::Domain(format!("attention row {i} sums to zero")));
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            m.row_mut(i).iter_mut().for_each(|v| *v /= sum);
            renormalized_rows.push(i);
        }
    }
    Ok(ImportedAttention {
        matrix: m,
        renormalized_rows,
    })
}

pub fn import_attention(path: &Path, format: MatrixFormat) -> Result<ImportedAttention> {
    validate_attention(read_matrix(path, format)?)
}

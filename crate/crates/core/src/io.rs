//! File formats: cost matrices (CSV and raw binary), trace CSV, and logistic
//! sample CSV.
//!
//! Cost CSV: one matrix row per line, comma-separated decimals with a `.`
//! point, no header. Cost binary: two little-endian `u32` dimensions
//! (rows, cols) followed by `rows * cols` little-endian `f64` in row-major
//! order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::logistic::LogisticProblem;
use crate::trace::Trace;

pub const TRACE_HEADER: &str = "iter,elapsed_sec,objective,primal_residual,dual_residual,R_residual";

fn io_error(path: &Path, err: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Parses comma-separated rows of numbers; blank lines are skipped.
fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: cannot parse '{field}' as a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Format(format!(
                    "line {}: expected {first} fields, found {}",
                    lineno + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(rows)
}

pub fn parse_cost_csv(text: &str) -> Result<Matrix> {
    Matrix::from_rows(&parse_rows(text)?)
}

pub fn format_cost_csv(cost: &Matrix) -> String {
    let mut out = String::with_capacity(cost.rows() * cost.cols() * 20);
    for i in 0..cost.rows() {
        for (j, v) in cost.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // shortest representation that round-trips
            write!(out, "{v:?}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn read_cost_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    parse_cost_csv(&read_text(path)?).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_cost_csv(path: impl AsRef<Path>, cost: &Matrix) -> Result<()> {
    write_bytes(path.as_ref(), format_cost_csv(cost).as_bytes())
}

pub fn encode_cost_binary(cost: &Matrix) -> Result<Vec<u8>> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(8 + 8 * cost.as_slice().len());
    out.extend_from_slice(&dim(cost.rows())?.to_le_bytes());
    out.extend_from_slice(&dim(cost.cols())?.to_le_bytes());
    for v in cost.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cost_binary(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 8 {
        return Err(Error::Format(format!(
            "binary cost file has {} bytes, header needs 8",
            bytes.len()
        )));
    }
    let rows = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("dimensions {rows}x{cols} overflow")))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "binary cost file {rows}x{cols} needs {expected} data bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Matrix::new(rows, cols, data)
}

pub fn read_cost_binary(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    decode_cost_binary(&fs::read(path).map_err(|e| io_error(path, e))?)
}

pub fn write_cost_binary(path: impl AsRef<Path>, cost: &Matrix) -> Result<()> {
    write_bytes(path.as_ref(), &encode_cost_binary(cost)?)
}

/// Reads a cost matrix, choosing binary for a `.bin` extension and CSV otherwise.
pub fn read_cost_file(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_cost_binary(path),
        _ => read_cost_csv(path),
    }
}

/// Trace as CSV with [`TRACE_HEADER`]; floats carry 17 significant digits.
pub fn format_trace_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 + trace.len() * 120);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace.records() {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iter, r.elapsed_sec, r.objective, r.primal_residual, r.dual_residual, r.r_residual
        )
        .expect("string write");
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &Trace) -> Result<()> {
    write_bytes(path.as_ref(), format_trace_csv(trace).as_bytes())
}

/// Samples as CSV rows: features then the `+-1` label in the last column.
pub fn parse_logistic_csv(text: &str, lambda: f64) -> Result<LogisticProblem> {
    let rows = parse_rows(text)?;
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::Format(
            "logistic rows need at least one feature and a label".into(),
        ));
    }
    let labels = Vector::new(rows.iter().map(|r| r[width - 1]).collect())?;
    let features = Matrix::new(
        rows.len(),
        width - 1,
        rows.iter().flat_map(|r| r[..width - 1].iter().copied()).collect(),
    )?;
    LogisticProblem::new(features, labels, lambda)
}

pub fn read_logistic_csv(path: impl AsRef<Path>, lambda: f64) -> Result<LogisticProblem> {
    let path = path.as_ref();
    parse_logistic_csv(&read_text(path)?, lambda).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

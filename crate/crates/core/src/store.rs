//! Dense matrices as raw little-endian `f64` (row-major) plus a JSON header.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub layout: String,
    /// Caller-supplied metadata (time grid, weights, config hash, ...).
    #[serde(default)]
    pub meta: Value,
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("bin"), base.with_extension("json"))
}

/// Writes `<base>.bin` and `<base>.json`.
pub fn write_matrix(base: &Path, m: &DMatrix<f64>, meta: Value) -> Result<()> {
    let (bin, json) = paths(base);
    let mut bytes = Vec::with_capacity(m.len() * 8);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            bytes.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    fs::write(bin, bytes)?;
    let header = MatrixHeader {
        rows: m.nrows(),
        cols: m.ncols(),
        dtype: "f64le".into(),
        layout: "row-major".into(),
        meta,
    };
    fs::write(json, serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_matrix(base: &Path) -> Result<(DMatrix<f64>, MatrixHeader)> {
    let (bin, json) = paths(base);
    let header: MatrixHeader = serde_json::from_str(&fs::read_to_string(json)?)?;
    let bytes = fs::read(bin)?;
    if header.dtype != "f64le"
        || header.layout != "row-major"
        || bytes.len() != header.rows * header.cols * 8
    {
        return Err(Error::InvalidInput(format!(
            "matrix file does not match its header ({} bytes for {}x{} {}/{})",
            bytes.len(),
            header.rows,
            header.cols,
            header.dtype,
            header.layout
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((
        DMatrix::from_row_slice(header.rows, header.cols, &vals),
        header,
    ))
}

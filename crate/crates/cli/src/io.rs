//! Dataset CSV reading/writing and output helpers.
//!
//! Dataset files have a header row `y,w,x1,...,xp` followed by one row per
//! observation. Numbers are written in shortest round-trip form so that a
//! written dataset parses back bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use segdetect::Dataset;

use crate::error::{CliError, CliResult};

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "y" || names[1] != "w" {
        return Err(CliError::Input(format!(
            "line 1: header must be y,w,x1,...,xp; got {}",
            names.join(",")
        )));
    }
    for (k, name) in names[2..].iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(CliError::Input(format!(
                "line 1, column {}: expected header x{}, got '{name}'",
                k + 3,
                k + 1
            )));
        }
    }
    let p = names.len() - 2;

    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut x = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| {
            let line = e.position().map_or(row + 1, |pos| pos.line() as usize);
            CliError::Input(format!("row {row} (line {line}): {e}"))
        })?;
        let line = record.position().map_or(row + 1, |pos| pos.line() as usize);
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                CliError::Input(format!(
                    "row {row} (line {line}), column {} ({}): '{cell}' is not a finite number",
                    c + 1,
                    names[c]
                ))
            })?;
            match c {
                0 => y.push(value),
                1 => w.push(value),
                _ => x.push(value),
            }
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(CliError::Input("dataset has no rows".into()));
    }
    let x = Array2::from_shape_vec((n, p), x)
        .map_err(|e| CliError::Internal(format!("design assembly failed: {e}")))?;
    Ok(Dataset::new(Array1::from(y), x, Array1::from(w))?)
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut out = String::from("y,w");
    for k in 1..=data.p() {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    let (y, w, x) = (data.y(), data.w(), data.x());
    for i in 0..data.n() {
        let _ = write!(out, "{},{}", y[i], w[i]);
        for v in x.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// `dir/stem.csv` -> `dir/stem.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Six-decimal rendering for metric tables; `NA` for absent values.
pub fn metric(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "NA".into(),
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

//! CSV readers and writers.
//!
//! Input CSVs have no header; `#` lines are comments. A matrix is one row per
//! line. A vector may be written as a single row or a single column.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, Result};

fn read_rows<R: Read>(reader: R, origin: &str) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{origin}: {e}")))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::input(format!("{origin}: record {}: `{field}` is not a finite number", i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn parse_matrix<R: Read>(reader: R, origin: &str) -> Result<DMatrix<f64>> {
    let rows = read_rows(reader, origin)?;
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::input(format!("{origin}: empty matrix")));
    }
    let n = rows[0].len();
    Ok(DMatrix::from_row_iterator(rows.len(), n, rows.into_iter().flatten()))
}

pub fn parse_vector<R: Read>(reader: R, origin: &str) -> Result<Vec<f64>> {
    let rows = read_rows(reader, origin)?;
    match rows.as_slice() {
        [] => Ok(Vec::new()),
        [single] => Ok(single.clone()),
        many if many.iter().all(|r| r.len() == 1) => Ok(many.iter().map(|r| r[0]).collect()),
        _ => Err(CliError::input(format!("{origin}: expected a single row or a single column"))),
    }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(open(path)?, &path.display().to_string())
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let v = parse_vector(open(path)?, &path.display().to_string())?;
    if v.is_empty() {
        return Err(CliError::input(format!("{}: empty vector", path.display())));
    }
    Ok(DVector::from_vec(v))
}

/// Samples may be empty; callers decide whether that is an error.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    parse_vector(open(path)?, &path.display().to_string())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let rows: Vec<Vec<String>> =
        m.row_iter().map(|r| r.iter().map(|v| crate::format::number(*v)).collect()).collect();
    write_csv(Some(path), None, &rows)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = v.iter().map(|v| vec![crate::format::number(*v)]).collect();
    write_csv(Some(path), None, &rows)
}

/// Writes `rows` under `header` to `path`, or to stdout when `path` is `None`.
pub fn write_csv(path: Option<&Path>, header: Option<&[&str]>, rows: &[Vec<String>]) -> Result<()> {
    let mut buf = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Failure(format!("writing CSV: {e}"));
    if let Some(h) = header {
        buf.write_record(h).map_err(fail)?;
    }
    for r in rows {
        buf.write_record(r).map_err(fail)?;
    }
    let bytes = buf.into_inner().map_err(|e| CliError::Failure(format!("writing CSV: {e}")))?;
    write_bytes(path, &bytes)
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => io::stdout().lock().write_all(bytes).map_err(|e| CliError::Failure(format!("stdout: {e}"))),
    }
}

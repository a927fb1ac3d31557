//! Matrix persistence: row-major CSV files and inline JSON row arrays.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reads a headerless, comma-separated, row-major matrix.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}: `{field}`: {e}", path.as_ref().display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    rows_to_matrix(&rows)
}

pub fn write_csv_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "ragged matrix: expected {ncols} columns, found a row with {}",
            bad.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Interprets a JSON value as either inline rows or a CSV path relative to `base`.
pub fn matrix_from_json(value: &serde_json::Value, base: &Path) -> Result<DMatrix<f64>> {
    match value {
        serde_json::Value::String(p) => {
            let path = Path::new(p);
            let path = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
            read_csv_matrix(path)
        }
        serde_json::Value::Array(_) => {
            let rows: Vec<Vec<f64>> = serde_json::from_value(value.clone())?;
            rows_to_matrix(&rows)
        }
        serde_json::Value::Number(n) => {
            let v = n.as_f64().ok_or_else(|| Error::Parse("non-finite number".into()))?;
            Ok(DMatrix::from_element(1, 1, v))
        }
        other => Err(Error::Parse(format!("expected rows or CSV path, found {other}"))),
    }
}

pub(crate) fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// `serde(with = ...)` adapter storing a matrix as an array of rows.
pub mod rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::linalg::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        rows_to_matrix(&rows).map_err(serde::de::Error::custom)
    }
}

/// Same as [`rows`] for optional matrices.
pub mod opt_rows {
    use super::*;

    pub fn serialize<S: Serializer>(
        m: &Option<DMatrix<f64>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(crate::linalg::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<DMatrix<f64>>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        rows.map(|r| rows_to_matrix(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}

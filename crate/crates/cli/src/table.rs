//! Feature and label CSV files.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::path::Path;

use sealkit::svm::ClassLabel;
use sealkit::FeatureVector;

use crate::Failure;

pub const FEATURE_HEADER: [&str; 10] =
    ["path", "f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9"];

pub struct FeatureRow {
    pub path: String,
    pub features: FeatureVector,
    pub label: Option<ClassLabel>,
}

impl FeatureRow {
    /// CSV fields; numbers use the shortest representation that parses back
    /// to the same value.
    pub fn fields(&self) -> Vec<String> {
        let mut out = vec![self.path.clone()];
        out.extend(self.features.0.iter().map(|v| v.to_string()));
        if let Some(label) = self.label {
            out.push(label.to_string());
        }
        out
    }
}

fn io_failure(path: &Path, source: std::io::Error) -> Failure {
    Failure::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_failure(path: &Path, e: csv::Error) -> Failure {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_failure(path, source),
        other => Failure::Malformed {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Failure {
    Failure::Malformed {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Appends one row, writing the header first when the file is new or empty.
pub fn append_feature_row(path: &Path, row: &FeatureRow) -> Result<(), Failure> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_failure(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(FEATURE_HEADER)
            .map_err(|e| csv_failure(path, e))?;
    }
    w.write_record(row.fields())
        .map_err(|e| csv_failure(path, e))?;
    w.flush().map_err(|e| io_failure(path, e))
}

pub fn write_corpus(path: &Path, rows: &[FeatureRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_failure(path, e))?;
    let mut header: Vec<&str> = FEATURE_HEADER.to_vec();
    header.push("label");
    w.write_record(&header).map_err(|e| csv_failure(path, e))?;
    for row in rows {
        w.write_record(row.fields())
            .map_err(|e| csv_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord), Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_failure(path, e))?;
    let header = r.headers().map_err(|e| csv_failure(path, e))?.clone();
    Ok((r, header))
}

fn column(path: &Path, header: &csv::StringRecord, name: &str) -> Result<usize, Failure> {
    header
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| malformed(path, format!("missing column `{name}`")))
}

/// Reads `path,f1..f9` columns (by name; extra columns are ignored).
pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>, Failure> {
    let (mut r, header) = open(path)?;
    let path_col = column(path, &header, "path")?;
    let mut cols = [0usize; 9];
    for (i, c) in cols.iter_mut().enumerate() {
        *c = column(path, &header, &format!("f{}", i + 1))?;
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_failure(path, e))?;
        let mut f = [0.0; 9];
        for (v, &c) in f.iter_mut().zip(&cols) {
            let text = rec.get(c).unwrap_or("").trim();
            *v = text.parse().map_err(|_| {
                malformed(path, format!("row {}: {text:?} is not a number", line + 1))
            })?;
        }
        rows.push(FeatureRow {
            path: rec.get(path_col).unwrap_or("").to_string(),
            features: FeatureVector(f),
            label: None,
        });
    }
    Ok(rows)
}

/// Reads the `path` and `label` columns into a lookup table.
pub fn read_labels(path: &Path) -> Result<HashMap<String, ClassLabel>, Failure> {
    let (mut r, header) = open(path)?;
    let path_col = column(path, &header, "path")?;
    let label_col = column(path, &header, "label")?;
    let mut out = HashMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_failure(path, e))?;
        let text = rec.get(label_col).unwrap_or("");
        let label: ClassLabel = text.parse().map_err(|_| {
            malformed(
                path,
                format!("row {}: {text:?} is not a class label", line + 1),
            )
        })?;
        out.insert(rec.get(path_col).unwrap_or("").to_string(), label);
    }
    Ok(out)
}

//! Dataset file handling: headered CSV with `smiles,label[,extras…]`
//! columns, `#`-prefixed comment lines, and row-numbered error reporting.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: csv::Error },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("missing required column '{0}' in header")]
    MissingColumn(&'static str),
    #[error("missing requested extra column '{0}' in header")]
    MissingExtraColumn(String),
    #[error("data row {row}: label '{value}' is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("data row {row}, column '{column}': '{value}' is not numeric")]
    BadExtra {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}: {source}")]
    BadRecord { row: usize, source: csv::Error },
    #[error("dataset has no data rows")]
    Empty,
    #[error("flip mask length {mask} does not match dataset size {rows}")]
    MaskMismatch { mask: usize, rows: usize },
}

/// One dataset row: the molecule text, the binary target, and any extra
/// numeric covariates that were requested at load time.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub smiles: String,
    pub label: bool,
    pub extras: Vec<f64>,
}

/// An in-memory dataset, loaded column subset included.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    /// Names of the extra columns, in `records[i].extras` order.
    pub extra_columns: Vec<String>,
}

impl Dataset {
    #[must_use]
    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label).collect()
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn reader_for(path: &Path) -> Result<csv::Reader<File>, DatasetError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DatasetError::Read {
            path: path.display().to_string(),
            source,
        })
}

/// Load a dataset, keeping only the requested `extras` columns (pass an
/// empty slice to ignore extras entirely). Row numbers in errors count
/// data rows from 1, excluding the header and comment lines.
pub fn read_dataset(path: &Path, extras: &[String]) -> Result<Dataset, DatasetError> {
    let mut reader = reader_for(path)?;
    let headers = reader
        .headers()
        .map_err(|source| DatasetError::Read {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let position = |name: &str| headers.iter().position(|h| h == name);
    let smiles_at = position("smiles").ok_or(DatasetError::MissingColumn("smiles"))?;
    let label_at = position("label").ok_or(DatasetError::MissingColumn("label"))?;
    let extra_at: Vec<usize> = extras
        .iter()
        .map(|name| position(name).ok_or_else(|| DatasetError::MissingExtraColumn(name.clone())))
        .collect::<Result<_, _>>()?;

    let mut records = Vec::new();
    for (offset, result) in reader.records().enumerate() {
        let row = offset + 1;
        let record = result.map_err(|source| DatasetError::BadRecord { row, source })?;
        let field = |at: usize| record.get(at).unwrap_or("").to_string();
        let label = match field(label_at).as_str() {
            "0" => false,
            "1" => true,
            other => {
                return Err(DatasetError::BadLabel {
                    row,
                    value: other.to_string(),
                });
            }
        };
        let extras = extra_at
            .iter()
            .map(|&at| {
                let raw = field(at);
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::BadExtra {
                        row,
                        column: headers[at].to_string(),
                        value: raw,
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        records.push(DatasetRecord {
            smiles: field(smiles_at),
            label,
            extras,
        });
    }
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(Dataset {
        records,
        extra_columns: extras.to_vec(),
    })
}

/// Load a dataset keeping every column beyond `smiles`/`label` as an
/// extra, whatever it is named. Used by operations that must preserve the
/// file's full shape (e.g. label flipping).
pub fn read_dataset_all_columns(path: &Path) -> Result<Dataset, DatasetError> {
    let mut reader = reader_for(path)?;
    let extras: Vec<String> = reader
        .headers()
        .map_err(|source| DatasetError::Read {
            path: path.display().to_string(),
            source,
        })?
        .iter()
        .filter(|h| *h != "smiles" && *h != "label")
        .map(str::to_string)
        .collect();
    read_dataset(path, &extras)
}

/// Write a dataset as CSV, prefixing the given comment lines (already
/// including their leading `#`).
pub fn write_dataset(
    path: &Path,
    dataset: &Dataset,
    comment_lines: &[String],
) -> Result<(), DatasetError> {
    let to_write_err = |source: std::io::Error| DatasetError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(to_write_err)?;
    let mut out = BufWriter::new(file);
    for line in comment_lines {
        writeln!(out, "{line}").map_err(to_write_err)?;
    }
    write!(out, "smiles,label").map_err(to_write_err)?;
    for name in &dataset.extra_columns {
        write!(out, ",{name}").map_err(to_write_err)?;
    }
    writeln!(out).map_err(to_write_err)?;
    for record in &dataset.records {
        write!(out, "{},{}", record.smiles, u8::from(record.label)).map_err(to_write_err)?;
        for value in &record.extras {
            write!(out, ",{value}").map_err(to_write_err)?;
        }
        writeln!(out).map_err(to_write_err)?;
    }
    out.flush().map_err(to_write_err)
}

/// Write the sidecar mask produced by a label flip: one row per dataset
/// row, marking which labels were inverted.
pub fn write_flip_mask(
    path: &Path,
    mask: &[bool],
    comment_lines: &[String],
) -> Result<(), DatasetError> {
    let to_write_err = |source: std::io::Error| DatasetError::Write {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(to_write_err)?;
    let mut out = BufWriter::new(file);
    for line in comment_lines {
        writeln!(out, "{line}").map_err(to_write_err)?;
    }
    writeln!(out, "row,flipped").map_err(to_write_err)?;
    for (row, flipped) in mask.iter().enumerate() {
        writeln!(out, "{row},{}", u8::from(*flipped)).map_err(to_write_err)?;
    }
    out.flush().map_err(to_write_err)
}

/// Apply a flip mask to a dataset's labels, returning the flipped copy.
pub fn apply_flip(dataset: &Dataset, mask: &[bool]) -> Result<Dataset, DatasetError> {
    if mask.len() != dataset.records.len() {
        return Err(DatasetError::MaskMismatch {
            mask: mask.len(),
            rows: dataset.records.len(),
        });
    }
    let records = dataset
        .records
        .iter()
        .zip(mask)
        .map(|(r, &flip)| DatasetRecord {
            label: r.label != flip,
            ..r.clone()
        })
        .collect();
    Ok(Dataset {
        records,
        extra_columns: dataset.extra_columns.clone(),
    })
}

/// Distinct labels present, for quick degenerate-input checks.
#[must_use]
pub fn distinct_labels(dataset: &Dataset) -> BTreeSet<bool> {
    dataset.records.iter().map(|r| r.label).collect()
}

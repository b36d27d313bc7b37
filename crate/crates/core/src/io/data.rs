use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DataSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    /// Column holding observed labels; absent columns mean "no labels".
    pub label_column: String,
    /// Column holding ground-truth classes, excluded from the features.
    pub truth_column: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
            truth_column: None,
        }
    }
}

/// Parsed CSV after merging duplicate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub data: DataSet,
    /// Representative of every input row.
    pub expansion: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Ground-truth cells per input row, when a truth column was requested.
    pub truth: Option<Vec<String>>,
}

impl LoadedData {
    pub fn num_rows(&self) -> usize {
        self.expansion.len()
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<LoadedData> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file, opts)
}

pub fn parse_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut label_col = None;
    let mut truth_col = None;
    let mut features = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if h == opts.label_column {
            label_col = Some(i);
        } else if opts.truth_column.as_deref() == Some(h) {
            truth_col = Some(i);
        } else {
            features.push(i);
        }
    }
    if let Some(t) = &opts.truth_column {
        if truth_col.is_none() {
            return Err(Error::Format(format!("truth column {t:?} not found")));
        }
    }
    if features.is_empty() {
        return Err(Error::Format("no feature columns".into()));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut truth = truth_col.map(|_| Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => Error::Format(format!(
                "row {}: expected {expected_len} fields, found {len}",
                r + 1
            )),
            _ => Error::Csv(e),
        })?;
        let mut row = Vec::with_capacity(features.len());
        for &c in &features {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: headers[c].to_string(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    column: headers[c].to_string(),
                    message: format!("{cell:?} is not finite"),
                });
            }
            row.push(v);
        }
        rows.push(row);
        labels.push(label_col.and_then(|c| {
            let s = &record[c];
            (!s.is_empty()).then(|| s.to_string())
        }));
        if let (Some(t), Some(c)) = (truth.as_mut(), truth_col) {
            t.push(record[c].to_string());
        }
    }
    let (data, expansion) = DataSet::deduplicated(rows, labels)?;
    Ok(LoadedData {
        data,
        expansion,
        feature_names: features.iter().map(|&c| headers[c].to_string()).collect(),
        truth,
    })
}

/// Writes a dataset with columns `x0..x{D-1}, label`. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(writer: W, data: &DataSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim()).map(|d| format!("x{d}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (i, x) in data.points().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(data.labels()[i].clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::KernelFamily;
use crate::partition::Partition;
use crate::sampler::PosteriorTrace;

pub const TRACE_HEADER: [&str; 5] = [
    "sweep",
    "assignment",
    "lengthscales",
    "temperature",
    "loglik",
];

/// One parsed trace CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    pub partition: Partition,
    /// Empty for kernels without lengthscales.
    pub lengthscales: Vec<f64>,
    pub temperature: f64,
    pub loglik: f64,
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

/// Writes the trace. `expansion`, when given, maps every sample back onto
/// the original (pre-deduplication) rows.
pub fn write_trace<W: Write>(
    writer: W,
    trace: &PosteriorTrace,
    expansion: Option<&[usize]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for s in &trace.samples {
        let partition = match expansion {
            Some(e) => s.partition.expand(e),
            None => s.partition.clone(),
        };
        let lengthscales = match &s.params.family {
            KernelFamily::SquaredExponential { lengthscales } => join_f64(lengthscales),
            KernelFamily::Delta { .. } => String::new(),
        };
        w.write_record([
            s.sweep.to_string(),
            partition.to_string(),
            lengthscales,
            s.params.temperature.to_string(),
            s.log_likelihood.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(row: usize, column: &str, cell: &str) -> Result<T> {
    cell.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("cannot parse {cell:?}"),
    })
}

pub fn parse_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != TRACE_HEADER {
        return Err(Error::Format(format!(
            "trace header must be {}, got {}",
            TRACE_HEADER.join(","),
            got.join(",")
        )));
    }
    let mut out: Vec<TraceRow> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("trace row {}: {e}", i + 1)))?;
        let row = i + 1;
        let partition: Partition = rec[1].parse().map_err(|e: Error| Error::Parse {
            row,
            column: "assignment".into(),
            message: e.to_string(),
        })?;
        if let Some(prev) = out.first() {
            if prev.partition.len() != partition.len() {
                return Err(Error::Format(format!(
                    "trace row {row} has a different point count"
                )));
            }
        }
        let ls = rec[2].trim();
        let lengthscales = if ls.is_empty() {
            Vec::new()
        } else {
            ls.split('|')
                .map(|c| parse_field::<f64>(row, "lengthscales", c))
                .collect::<Result<_>>()?
        };
        out.push(TraceRow {
            sweep: parse_field(row, "sweep", &rec[0])?,
            partition,
            lengthscales,
            temperature: parse_field(row, "temperature", &rec[3])?,
            loglik: parse_field(row, "loglik", &rec[4])?,
        });
    }
    Ok(out)
}

/// Reads a partition file: the first non-empty, non-comment line holds the
/// `|`-joined ids.
pub fn read_partition(path: impl AsRef<Path>) -> Result<Partition> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_partition_text(&text)
}

pub fn parse_partition_text(text: &str) -> Result<Partition> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::Format("partition file is empty".into()))?;
    line.parse()
}

/// Parses non-negative integers separated by whitespace or commas; `#`
/// starts a comment running to end of line.
pub fn parse_indices(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            out.push(
                tok.parse().map_err(|_| {
                    Error::Format(format!("line {}: {tok:?} is not an index", ln + 1))
                })?,
            );
        }
    }
    Ok(out)
}

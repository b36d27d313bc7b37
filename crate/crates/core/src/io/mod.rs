//! File formats and data sources.
//!
//! * dataset CSV: header row, feature columns in order, optional `label`
//!   column (empty cell = unlabeled);
//! * partition text: canonical ids joined by `|`;
//! * trace CSV: `sweep, assignment, lengthscales, temperature, loglik`;
//! * index lists: integers separated by whitespace or commas, `#` comments;
//! * run configuration and manifest: JSON.

pub mod config;
pub mod data;
pub mod synth;
pub mod trace;

pub use config::{InputSource, Manifest, RunConfig};
pub use data::{load_csv, parse_csv, write_csv, CsvOptions, LoadedData};
pub use synth::{generate_synthetic, Scenario, SyntheticData, SyntheticSpec};
pub use trace::{
    parse_indices, parse_partition_text, parse_trace, read_partition, write_trace, TraceRow,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::data::CsvOptions;
use crate::io::synth::SyntheticSpec;
use crate::kernel::KernelParams;
use crate::sampler::{LogNormalPrior, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        csv: CsvOptions,
    },
    Synthetic {
        spec: SyntheticSpec,
    },
}

/// Everything that determines a `fit` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSource,
    /// Initial kernel parameters and temperature.
    pub kernel: KernelParams,
    #[serde(default)]
    pub prior: LogNormalPrior,
    #[serde(default)]
    pub sampler: SamplerConfig,
    pub output_dir: PathBuf,
    /// Ground-truth partition file over the input rows.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    /// Rows to score; defaults to the unlabeled rows.
    #[serde(default)]
    pub test_indices: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        // A manifest carries the config under `config`.
        let value: serde_json::Value = serde_json::from_str(text)?;
        let cfg: RunConfig = match value.get("config") {
            Some(inner) if value.get("version").is_some() => serde_json::from_value(inner.clone())?,
            _ => serde_json::from_value(value)?,
        };
        cfg.validate_values()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Numeric invariants of every nested type.
    pub fn validate_values(&self) -> Result<()> {
        self.kernel.validate()?;
        self.prior.validate()?;
        self.sampler.validate()?;
        if let InputSource::Synthetic { spec } = &self.input {
            spec.validate()?;
        }
        Ok(())
    }

    /// Value checks plus existence of every referenced input file.
    pub fn validate(&self) -> Result<()> {
        self.validate_values()?;
        let mut paths: Vec<&Path> = Vec::new();
        if let InputSource::Csv { path, .. } = &self.input {
            paths.push(path);
        }
        paths.extend(self.truth.as_deref());
        paths.extend(self.test_indices.as_deref());
        for p in paths {
            if !p.is_file() {
                return Err(Error::input(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub num_rows: usize,
    pub num_points: usize,
    pub dim: usize,
    pub num_labeled: usize,
    pub test_indices: Vec<usize>,
    pub nmi_variant: String,
    pub rng: String,
}

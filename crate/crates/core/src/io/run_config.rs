//! TOML run configuration: one file carrying the extraction, model,
//! and training settings plus working paths. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physio::NasalanceConfig;
use crate::tcn::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunPaths {
    /// Corpus directory holding recordings and `manifest.json`.
    pub corpus_dir: PathBuf,
    /// Output directory for splits, checkpoints, histories, reports.
    pub work_dir: PathBuf,
}

impl Default for RunPaths {
    fn default() -> Self {
        RunPaths {
            corpus_dir: PathBuf::from("corpus"),
            work_dir: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub nasalance: NasalanceConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub paths: RunPaths,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.nasalance.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Model configuration sized for the configured target set; the
    /// target set, not the raw `model.n_targets` field, decides the
    /// output width.
    pub fn model_for_targets(&self) -> ModelConfig {
        ModelConfig {
            n_targets: self.train.targets.n_targets(),
            ..self.model.clone()
        }
    }
}

pub fn read_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_run_config(path: impl AsRef<Path>, cfg: &RunConfig) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| Error::bad_file(path, format!("serialize: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

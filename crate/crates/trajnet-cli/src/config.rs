//! The declarative experiment description.
//!
//! One TOML file describes everything a run needs — model architecture,
//! ablation switches, optimization settings, preprocessing, synthetic-data
//! parameters, and where the dataset manifest lives — so that an experiment
//! is a reviewable artifact rather than a shell history. Command-line flags
//! override individual keys, and every subcommand writes the fully resolved
//! configuration it actually used into its output directory as
//! `resolved-config.toml`.
//!
//! Unknown keys anywhere in the file are rejected by name: a typo must never
//! silently fall back to a default.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use trajnet::data::SynthConfig;
use trajnet::model::{AblationCell, AblationFlags, ModelConfig};
use trajnet::training::{PreprocessConfig, TrainConfig};

use crate::error::{io_error, CliError};

/// Where the dataset manifest lives and how its splits are named, plus the
/// windowing knobs `gen-synth` bakes into manifests it writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Manifest consumed by `train`, `eval`, and `ablate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    pub train_split: String,
    pub eval_split: String,
    /// Window stride `gen-synth` writes into the manifest.
    pub stride: usize,
    /// Fraction of generated sequences `gen-synth` assigns to the eval split.
    pub eval_fraction: f64,
}

impl Default for DataSection {
    fn default() -> DataSection {
        DataSection {
            manifest: None,
            train_split: "train".into(),
            eval_split: "eval".into(),
            stride: 5,
            eval_fraction: 0.25,
        }
    }
}

/// The complete declarative description of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub ablations: AblationFlags,
    pub train: TrainConfig,
    pub preprocess: PreprocessConfig,
    pub synth: SynthConfig,
    pub data: DataSection,
}

/// Loads a configuration file, or the defaults when none was given.
pub fn load(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid config {}: {e}", p.display())))
        }
    }
}

/// Applies the common flag overrides. `--seed` funnels into both the
/// training and the synthesis seed (one knob controls all randomness);
/// `--ablation` replaces the model/ablation sections with the named cell
/// applied to the file's base model.
pub fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seed: Option<u64>,
    ablation: Option<&str>,
) -> Result<(), CliError> {
    if let Some(s) = seed {
        cfg.train.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(name) = ablation {
        let cell = AblationCell::parse(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown ablation cell `{name}` (expected one of {})",
                AblationCell::ALL.map(|c| c.label()).join(", ")
            ))
        })?;
        let (model, flags) = cell.apply(&cfg.model);
        cfg.model = model;
        cfg.ablations = flags;
    }
    Ok(())
}

/// Creates the output directory and records the fully resolved configuration
/// in it. Every subcommand calls this before doing real work, so even a
/// failed run leaves a reproducibility record.
pub fn write_snapshot(out: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let text = toml::to_string_pretty(cfg).expect("resolved config serializes");
    let path = out.join("resolved-config.toml");
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(())
}

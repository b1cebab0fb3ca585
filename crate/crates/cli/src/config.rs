//! Experiment configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use pgnaa_core::classifiers::{ClassifierKind, ClassifierSpec};
use pgnaa_core::experiment::{ExperimentConfig, LibrarySource};
use pgnaa_core::synth::MaterialKind;
use pgnaa_core::DetectorProfile;

/// Marks failures caused by the user's configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Experiment configuration (JSON). Flags below override its fields.
    #[arg(short, long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Library directory written by `gen-synth`.
    #[arg(long, value_name = "DIR", conflicts_with_all = ["material", "profile"])]
    pub library: Option<PathBuf>,

    /// Built-in template set: aluminium or copper.
    #[arg(long)]
    pub material: Option<String>,

    /// Detector preset, e.g. hpge-aluminium-block or cebr-aluminium-chips.
    #[arg(long)]
    pub profile: Option<String>,

    /// Detector count rate override.
    #[arg(long, value_name = "CPS")]
    pub counts_per_second: Option<f64>,

    /// Comma-separated measurement times in seconds.
    #[arg(long, value_delimiter = ',', value_name = "T,..")]
    pub time_grid: Option<Vec<f64>>,

    /// Classifiers to run (repeatable): mlc, kuiper, knn, rnc, lr, svm.
    #[arg(long = "classifier", value_name = "NAME")]
    pub classifiers: Vec<String>,

    #[arg(long)]
    pub n_train: Option<usize>,

    #[arg(long)]
    pub n_test: Option<usize>,

    #[arg(long)]
    pub repeats: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&raw).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

pub fn parse_classifier(name: &str) -> Result<ClassifierKind> {
    let canonical = match name.to_ascii_lowercase().as_str() {
        "mlc" => "mlc",
        "kui" | "kuiper" => "kuiper",
        "knn" => "knn",
        "rnc" => "rnc",
        "lr" | "logistic" | "logistic-regression" => "logistic-regression",
        "svm" | "linear-svm" => "linear-svm",
        other => return Err(config_error(format!("unknown classifier {other:?}"))),
    };
    Ok(serde_json::from_value(serde_json::Value::String(canonical.into()))?)
}

/// The spec of `kind` from `existing`, or its defaults.
pub fn spec_for(kind: ClassifierKind, existing: &[ClassifierSpec]) -> ClassifierSpec {
    existing
        .iter()
        .find(|s| s.kind() == kind)
        .cloned()
        .unwrap_or_else(|| ClassifierSpec::default_for(kind))
}

fn check_profile(name: &str) -> Result<()> {
    if DetectorProfile::by_name(name).is_none() {
        return Err(config_error(format!("unknown detector profile {name:?}")));
    }
    Ok(())
}

impl ConfigArgs {
    /// Config file (or defaults) with the flags applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => read_config(p)?,
            None => ExperimentConfig::default(),
        };
        self.apply(base)
    }

    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(dir) = &self.library {
            cfg.library = LibrarySource::Directory { path: dir.clone() };
        }
        if self.material.is_some() || self.profile.is_some() {
            let (mut material, mut profile, mut response) = match cfg.library {
                LibrarySource::Synthetic { material, profile, response } => (material, profile, response),
                LibrarySource::Directory { .. } => {
                    (MaterialKind::Aluminium, "hpge-aluminium-block".to_string(), None)
                }
            };
            if let Some(m) = &self.material {
                material = m.parse().map_err(|e: pgnaa_core::Error| config_error(e.to_string()))?;
            }
            if let Some(p) = &self.profile {
                check_profile(p)?;
                profile = p.clone();
                // A response set for another preset would not fit the new one.
                response = None;
            }
            cfg.library = LibrarySource::Synthetic { material, profile, response };
        }
        if let Some(c) = self.counts_per_second {
            cfg.counts_per_second = Some(c);
        }
        if let Some(g) = &self.time_grid {
            cfg.time_grid = g.clone();
        }
        if !self.classifiers.is_empty() {
            cfg.classifiers = self
                .classifiers
                .iter()
                .map(|n| parse_classifier(n).map(|k| spec_for(k, &cfg.classifiers)))
                .collect::<Result<_>>()?;
        }
        if let Some(n) = self.n_train {
            cfg.n_train = n;
        }
        if let Some(n) = self.n_test {
            cfg.n_test = n;
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(cfg)
    }
}

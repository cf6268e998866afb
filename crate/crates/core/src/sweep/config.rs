//! Experiment configuration files.
//!
//! TOML with four sections:
//!
//! ```toml
//! [dataset]
//! kind = "mnist"          # or "synthetic"
//! dir = "data/mnist"      # mnist: directory with the four IDX files
//! # synthetic: n_per_class = 50, size = 8, noise_std = 20.0
//!
//! [protocol]
//! num_tasks = 5
//! classes_per_task = 2
//! budgets = ["382KiB"]    # <number><B|KiB|MiB|GiB>, binary units
//! codecs = ["identity", "resize:8x8", "rp:128"]
//! runs = 5                # seeds base_seed .. base_seed + runs - 1
//! base_seed = 0
//!
//! [training]              # optional; any TrainConfig field
//! max_epochs = 256
//!
//! [output]
//! dir = "out"
//! record_wall_time = false
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codecs::CodecSpec;
use crate::error::{Error, Result};
use crate::learner::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    Mnist {
        dir: PathBuf,
    },
    Synthetic {
        n_per_class: usize,
        size: usize,
        noise_std: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub num_tasks: usize,
    pub classes_per_task: usize,
    pub budgets: Vec<String>,
    pub codecs: Vec<String>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_runs() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Fill the `wall_seconds` column. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub record_wall_time: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub training: TrainConfig,
    pub output: OutputConfig,
}

/// Parses `<number><unit>` with `B`, `KiB` (1024), `MiB` (1024²) or `GiB` (1024³).
pub fn parse_budget(text: &str) -> Result<usize> {
    let bad = || Error::ParseBudget(text.to_string());
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
    let (num, unit) = t.split_at(split);
    let value: usize = num.parse().map_err(|_| bad())?;
    let scale: usize = match unit {
        "B" => 1,
        "KiB" => 1 << 10,
        "MiB" => 1 << 20,
        "GiB" => 1 << 30,
        _ => return Err(bad()),
    };
    let bytes = value.checked_mul(scale).ok_or_else(bad)?;
    if bytes == 0 {
        return Err(bad());
    }
    Ok(bytes)
}

pub fn parse_codec(text: &str) -> Result<CodecSpec> {
    text.parse()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative dataset, manifest and output paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetConfig::Mnist { dir } = &mut self.dataset {
            fix(dir);
        }
        fix(&mut self.output.dir);
        for c in &mut self.protocol.codecs {
            if let Some(rest) = c.strip_prefix("external:") {
                let mut p = PathBuf::from(rest);
                fix(&mut p);
                *c = format!("external:{}", p.display());
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.protocol;
        if p.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if p.num_tasks == 0 || p.classes_per_task == 0 {
            return Err(Error::Config(
                "num_tasks and classes_per_task must be positive".into(),
            ));
        }
        if p.budgets.is_empty() || p.codecs.is_empty() {
            return Err(Error::Config(
                "need at least one budget and one codec".into(),
            ));
        }
        self.budgets()?;
        self.codecs()?;
        self.training.validate()
    }

    pub fn budgets(&self) -> Result<Vec<usize>> {
        self.protocol
            .budgets
            .iter()
            .map(|b| parse_budget(b))
            .collect()
    }

    pub fn codecs(&self) -> Result<Vec<CodecSpec>> {
        self.protocol
            .codecs
            .iter()
            .map(|c| parse_codec(c))
            .collect()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.protocol.runs as u64).map(move |i| self.protocol.base_seed + i)
    }
}

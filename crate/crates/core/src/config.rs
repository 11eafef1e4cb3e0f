//! Run configuration: model, training and data sections in one TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::PreprocessConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: PreprocessConfig,
    pub paths: Paths,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Yoochoose,
    Diginetica,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "yoochoose" => Ok(Preset::Yoochoose),
            "diginetica" => Ok(Preset::Diginetica),
            other => Err(format!("unknown preset {other:?} (expected yoochoose|diginetica)")),
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Yoochoose => Self {
                model: ModelConfig { dim: 96, heads: 2, ..Default::default() },
                data: PreprocessConfig::yoochoose(),
                ..Default::default()
            },
            Preset::Diginetica => Self {
                model: ModelConfig { dim: 48, heads: 8, ..Default::default() },
                data: PreprocessConfig::diginetica(),
                ..Default::default()
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Compact single-line form for embedding in artifacts.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is always representable as JSON")
    }

    /// Validates everything except the vocabulary size, which is only known
    /// once data is loaded.
    pub fn validate(&self) -> Result<()> {
        let probe = ModelConfig { vocab_size: self.model.vocab_size.max(1), ..self.model.clone() };
        probe.validate()?;
        self.train.validate()?;
        let f = self.data.fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("fraction must be in (0, 1], got {f}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        let d = RunConfig::preset(Preset::Diginetica);
        assert_eq!(RunConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = RunConfig::from_toml_str("[model]\ndim = 16\nheads = 4\n[train]\nepochs = 3\n").unwrap();
        assert_eq!((cfg.model.dim, cfg.model.heads, cfg.model.layers), (16, 4, 1));
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.lr, 1e-3);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn presets() {
        let y = RunConfig::preset(Preset::Yoochoose);
        assert_eq!((y.model.dim, y.model.heads, y.model.layers, y.model.ffn_mult), (96, 2, 1, 4));
        let d = RunConfig::preset(Preset::Diginetica);
        assert_eq!((d.model.dim, d.model.heads), (48, 8));
        assert_eq!(d.data.holdout_days, 7.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml_str("[model]\nwidth = 3\n").is_err());
        let bad = RunConfig::from_toml_str("[model]\ndim = 10\nheads = 3\n").unwrap();
        assert!(bad.validate().is_err());
        let bad = RunConfig::from_toml_str("[data]\nfraction = 0.0\n").unwrap();
        assert!(bad.validate().is_err());
    }
}

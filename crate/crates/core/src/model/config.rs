use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossMode;

/// Which vector scores the candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PredictionMode {
    /// Latent vector of the last item (`h_n`).
    #[default]
    #[serde(rename = "last")]
    LastItem,
    /// Attention-pooled global vector concatenated with `h_n`, then
    /// projected back to `d`.
    #[serde(rename = "se")]
    SessionEmbedding,
}

impl std::str::FromStr for PredictionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(PredictionMode::LastItem),
            "se" => Ok(PredictionMode::SessionEmbedding),
            other => Err(format!("unknown prediction mode {other:?} (expected last|se)")),
        }
    }
}

impl std::fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictionMode::LastItem => "last",
            PredictionMode::SessionEmbedding => "se",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Embedding size `d`.
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    /// FFN hidden width is `ffn_mult * dim`.
    pub ffn_mult: usize,
    /// Number of real items; index 0 is padding and not counted.
    pub vocab_size: usize,
    pub prediction: PredictionMode,
    pub loss: LossMode,
    /// Divide attention logits by `sqrt(dim / heads)` instead of `sqrt(dim)`.
    pub scale_per_head: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 96,
            heads: 2,
            layers: 1,
            ffn_mult: 4,
            vocab_size: 0,
            prediction: PredictionMode::LastItem,
            loss: LossMode::CategoricalCe,
            scale_per_head: false,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.layers == 0 || self.ffn_mult == 0 {
            return Err(Error::Config(
                "dim, heads, layers and ffn_mult must all be at least 1".into(),
            ));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "dim {} is not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be at least 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    #[inline]
    pub fn ffn_dim(&self) -> usize {
        self.ffn_mult * self.dim
    }

    /// Divisor applied to the query-key dot products.
    pub fn attention_scale(&self) -> f64 {
        if self.scale_per_head {
            (self.head_dim() as f64).sqrt()
        } else {
            (self.dim as f64).sqrt()
        }
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use srsan::config::{Preset, RunConfig};
use srsan::loss::LossMode;
use srsan::model::PredictionMode;
use srsan::Result;

#[derive(Debug, Parser)]
#[command(name = "srsan", version, about = "Self-attention session recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw click log -> train/test instance files, vocabulary and stats.
    Preprocess(Common),
    /// Train on a preprocessed directory and write the best checkpoint.
    Train(Common),
    /// HR@k / MRR@k of a checkpoint on the test instances.
    Eval(Common),
    /// Top-k next items for one session of raw item ids.
    Recommend {
        #[command(flatten)]
        common: Common,
        /// Raw item ids, oldest first.
        #[arg(required = true)]
        items: Vec<String>,
    },
    /// Finite-difference check of every gradient on a tiny 64-bit model.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Test hook: perturb one analytic gradient.
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
    /// Train and evaluate every point of an architecture grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// e.g. "d=48,96;h=1,2,4;L=1,2"
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults used when no config file is given.
    #[arg(long, default_value = "yoochoose")]
    pub preset: Preset,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub ffn_mult: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub loss: Option<LossMode>,
    #[arg(long)]
    pub predict: Option<PredictionMode>,
    #[arg(long)]
    pub fraction: Option<f64>,
}

impl Common {
    /// Config file (or preset), then every given flag on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::preset(self.preset),
        };
        let m = &mut cfg.model;
        let t = &mut cfg.train;
        if let Some(s) = self.seed {
            m.seed = s;
            t.seed = s;
        }
        set(&mut m.dim, self.d);
        set(&mut m.heads, self.heads);
        set(&mut m.layers, self.layers);
        set(&mut m.ffn_mult, self.ffn_mult);
        set(&mut m.loss, self.loss);
        set(&mut m.prediction, self.predict);
        set(&mut t.k, self.k);
        set(&mut t.epochs, self.epochs);
        set(&mut t.lr, self.lr);
        set(&mut t.l2, self.l2);
        set(&mut t.batch_size, self.batch);
        set(&mut cfg.data.fraction, self.fraction);
        if self.data.is_some() {
            cfg.paths.data = self.data.clone();
        }
        if self.out.is_some() {
            cfg.paths.out = self.out.clone();
        }
        if self.checkpoint.is_some() {
            cfg.paths.checkpoint = self.checkpoint.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

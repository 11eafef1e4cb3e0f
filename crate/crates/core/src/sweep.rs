//! Exhaustive grid over architecture sizes, trained sequentially on shared
//! data.

use std::fmt;

use serde::Serialize;

use crate::data::Session;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::ModelConfig;
use crate::trainer::{fit, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GridKey {
    Dim,
    Heads,
    Layers,
    FfnMult,
}

impl std::str::FromStr for GridKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "d" | "dim" => Ok(GridKey::Dim),
            "h" | "heads" => Ok(GridKey::Heads),
            "L" | "layers" => Ok(GridKey::Layers),
            "ffn_mult" | "ffn-mult" => Ok(GridKey::FfnMult),
            other => Err(Error::Config(format!("unknown grid dimension {other:?} (expected d, h, L, ffn_mult)"))),
        }
    }
}

/// Parsed `key=v1,v2;key=v3` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub axes: Vec<(GridKey, Vec<usize>)>,
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut axes: Vec<(GridKey, Vec<usize>)> = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, vs) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid entry {part:?} is not key=values")))?;
            let key: GridKey = k.parse()?;
            if axes.iter().any(|(existing, _)| *existing == key) {
                return Err(Error::Config(format!("grid dimension {k:?} given twice")));
            }
            let values = vs
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Config(format!("grid value {v:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            axes.push((key, values));
        }
        if axes.is_empty() {
            return Err(Error::Config("empty grid".into()));
        }
        Ok(GridSpec { axes })
    }
}

impl GridSpec {
    /// Cartesian product in row-major order (last axis fastest).
    pub fn points(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = vec![base.clone()];
        for (key, values) in &self.axes {
            out = out
                .iter()
                .flat_map(|cfg| {
                    values.iter().map(move |&v| {
                        let mut c = cfg.clone();
                        match key {
                            GridKey::Dim => c.dim = v,
                            GridKey::Heads => c.heads = v,
                            GridKey::Layers => c.layers = v,
                            GridKey::FfnMult => c.ffn_mult = v,
                        }
                        c
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_mult: usize,
    pub best_epoch: Option<usize>,
    pub hr: f64,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub k: usize,
    /// Sorted by MRR, then HR, best first.
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<String>,
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.skipped {
            writeln!(f, "skipped: {s}")?;
        }
        writeln!(f, "d\th\tL\tffn\tHR@{k}\tMRR@{k}", k = self.k)?;
        for r in &self.rows {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                r.dim, r.heads, r.layers, r.ffn_mult, r.hr, r.mrr
            )?;
        }
        Ok(())
    }
}

pub fn run_sweep(
    base: &ModelConfig,
    grid: &GridSpec,
    train: &[Session],
    test: &[Session],
    train_cfg: &TrainConfig,
    mut notice: impl FnMut(&str),
) -> Result<SweepReport> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for cfg in grid.points(base) {
        if let Err(e) = cfg.validate() {
            let msg = format!("d={} h={} L={} ffn_mult={}: {e}", cfg.dim, cfg.heads, cfg.layers, cfg.ffn_mult);
            notice(&msg);
            skipped.push(msg);
            continue;
        }
        let out = fit::<f32>(&cfg, train, Some(test), train_cfg, |_| {})?;
        let m = evaluate(&cfg, &out.params, test, train_cfg.k)?;
        notice(&format!("d={} h={} L={} ffn_mult={}: {m}", cfg.dim, cfg.heads, cfg.layers, cfg.ffn_mult));
        rows.push(SweepRow {
            dim: cfg.dim,
            heads: cfg.heads,
            layers: cfg.layers,
            ffn_mult: cfg.ffn_mult,
            best_epoch: out.best_epoch,
            hr: m.hr,
            mrr: m.mrr,
        });
    }
    rows.sort_by(|a, b| b.mrr.total_cmp(&a.mrr).then(b.hr.total_cmp(&a.hr)));
    Ok(SweepReport {
        k: train_cfg.k,
        rows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::successor_task;

    #[test]
    fn parse_grid() {
        let g: GridSpec = "d=8,16; h=2 ;L=1,2,3".parse().unwrap();
        assert_eq!(g.axes.len(), 3);
        assert_eq!(g.points(&ModelConfig::default()).len(), 6);
        assert!("x=1".parse::<GridSpec>().is_err());
        assert!("d=1,a".parse::<GridSpec>().is_err());
        assert!("d=8;d=16".parse::<GridSpec>().is_err());
        assert!("".parse::<GridSpec>().is_err());
    }

    #[test]
    fn invalid_points_skipped_and_layers_grid_has_three_rows() {
        let base = ModelConfig { dim: 8, heads: 2, ffn_mult: 1, vocab_size: 10, ..Default::default() };
        let train = successor_task(30, 10, 1);
        let test = successor_task(10, 10, 2);
        let tc = TrainConfig { epochs: 1, batch_size: 50, ..Default::default() };
        let mut notes = Vec::new();
        let g: GridSpec = "h=2,3;L=1,2,3".parse().unwrap();
        let r = run_sweep(&base, &g, &train, &test, &tc, |s| notes.push(s.to_string())).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.skipped.len(), 3);
        assert!(r.skipped[0].contains("h=3"));
        assert!(r.rows.windows(2).all(|w| w[0].mrr >= w[1].mrr));
        let mut layers: Vec<_> = r.rows.iter().map(|x| x.layers).collect();
        layers.sort();
        assert_eq!(layers, vec![1, 2, 3]);
        assert_eq!(notes.len(), 6);
    }
}

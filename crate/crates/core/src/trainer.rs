//! Optimization: coupled L2, Adam with bias correction, step-decay learning
//! rate, and the epoch loop with best-MRR model selection.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batch_iter, Batch, Session};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::model::{backward, forward, init_params, Gradients, ModelConfig, ModelParams};
use crate::nncore::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub epochs: usize,
    /// Cutoff for the per-epoch HR/MRR.
    pub k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            decay_factor: 0.1,
            decay_every: 3,
            batch_size: 100,
            l2: 1e-5,
            epochs: 12,
            k: 20,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must be in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(Error::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if self.batch_size == 0 || self.decay_every == 0 || self.k == 0 {
            return Err(Error::Config("batch_size, decay_every and k must be positive".into()));
        }
        Ok(())
    }
}

/// `lr · decay_factor^⌊epoch / decay_every⌋`.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.lr * cfg.decay_factor.powi((epoch / cfg.decay_every) as i32)
}

/// Adds `l2 · θ` to every gradient. The padding embedding row is exempt.
pub fn l2_penalty<T: Real>(params: &ModelParams<T>, grads: &mut Gradients<T>, l2: f64) {
    if l2 == 0.0 {
        return;
    }
    let l2 = T::lit(l2);
    let d = params.embed.cols();
    for ((_, p), g) in params.tensors().into_iter().zip(grads.tensors_mut()) {
        for (gv, &pv) in g.as_mut_slice().iter_mut().zip(p.as_slice()) {
            *gv += l2 * pv;
        }
    }
    grads.embed.as_mut_slice()[..d].fill(T::zero());
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment accumulators mirroring the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// One bias-corrected Adam update. Re-zeroes the padding row.
    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &Gradients<T>, lr: f64) {
        self.t += 1;
        let (b1, b2) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2));
        let c1 = T::lit(1.0 - ADAM_BETA1.powi(self.t as i32));
        let c2 = T::lit(1.0 - ADAM_BETA2.powi(self.t as i32));
        let lr = T::lit(lr);
        let eps = T::lit(ADAM_EPS);
        let one = T::one();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        let gs = grads.tensors();
        for (((p, m), v), (_, g)) in params.tensors_mut().into_iter().zip(ms).zip(vs).zip(gs) {
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
                .zip(g.as_slice());
            for (((p, m), v), &g) in iter {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        params.zero_padding_row();
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub k: usize,
    pub hr: Option<f64>,
    pub mrr: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<T> {
    pub params: ModelParams<T>,
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

fn dump_batch(batch: &Batch) -> String {
    let rows: Vec<String> = (0..batch.rows())
        .map(|r| format!("{:?}->{}", &batch.row(r)[..batch.lengths[r]], batch.labels[r]))
        .collect();
    rows.join(" ")
}

/// One optimizer step on a batch; returns the mean batch loss. A
/// non-finite loss or gradient skips the update and returns NaN.
pub fn train_step<T: Real>(
    model_cfg: &ModelConfig,
    params: &mut ModelParams<T>,
    adam: &mut AdamState<T>,
    batch: &Batch,
    lr: f64,
    l2: f64,
) -> Result<T> {
    let (_, cache) = forward(model_cfg, params, batch)?;
    let (loss, mut grads) = backward(model_cfg, params, &cache, &batch.labels)?;
    if !loss.is_finite() || !grads.all_finite() {
        return Ok(T::nan());
    }
    l2_penalty(params, &mut grads, l2);
    adam.step(params, &grads, lr);
    Ok(loss)
}

/// Trains from freshly initialized parameters.
///
/// After each epoch the model is evaluated on `valid` (when given) and the
/// parameters of the best-MRR epoch are kept, ties going to the earlier
/// epoch. Without a validation set the final parameters are returned.
pub fn fit<T: Real>(
    model_cfg: &ModelConfig,
    train: &[Session],
    valid: Option<&[Session]>,
    cfg: &TrainConfig,
    mut sink: impl FnMut(&EpochRecord),
) -> Result<FitOutcome<T>> {
    model_cfg.validate()?;
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("no training instances".into()));
    }
    let mut params = init_params::<T>(model_cfg)?;
    let mut adam = AdamState::new(&params);
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let lr = lr_at_epoch(cfg, epoch);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for (b, batch) in batch_iter(train, cfg.batch_size, cfg.seed, epoch).enumerate() {
            let loss = train_step(model_cfg, &mut params, &mut adam, &batch, lr, cfg.l2)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    dump: dump_batch(&batch),
                });
            }
            loss_sum += loss.as_f64();
            n_batches += 1;
        }
        let metrics = valid
            .map(|v| evaluate(model_cfg, &params, v, cfg.k))
            .transpose()?;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / n_batches as f64,
            k: cfg.k,
            hr: metrics.as_ref().map(|m| m.hr),
            mrr: metrics.as_ref().map(|m| m.mrr),
            seconds: start.elapsed().as_secs_f64(),
        };
        sink(&record);
        log.push(record);

        let score = metrics.map_or(f64::NEG_INFINITY, |m| m.mrr);
        let improved = match &best {
            None => true,
            Some((s, _, _)) => valid.is_none() || score > *s,
        };
        if improved {
            best = Some((score, epoch, params.clone()));
        }
    }

    Ok(match best {
        Some((_, epoch, p)) => FitOutcome {
            params: p,
            log,
            best_epoch: Some(epoch),
        },
        None => FitOutcome {
            params,
            log,
            best_epoch: None,
        },
    })
}

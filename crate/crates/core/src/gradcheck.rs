//! Central finite-difference verification of the hand-derived gradients on
//! a tiny 64-bit model.

use std::fmt;

use serde::Serialize;

use crate::data::{Batch, Session};
use crate::error::{Error, Result};
use crate::loss::{batch_loss_and_grad, LossMode};
use crate::model::{backward, forward, init_params, ModelConfig, ModelParams, PredictionMode};
use crate::trainer::l2_penalty;

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;
/// Denominator floor for the relative error, so that gradients that are
/// zero in exact arithmetic compare on an absolute scale.
pub const GRADCHECK_FLOOR: f64 = 1e-6;
/// Parameters are drawn at this multiple of the training init scale so
/// attention is far from uniform and every tensor's gradient is well above
/// finite-difference round-off.
pub const GRADCHECK_PARAM_SCALE: f64 = 3.0;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR)
}

/// The fixed tiny architecture used by the suite.
pub fn tiny_config(prediction: PredictionMode, loss: LossMode, seed: u64) -> ModelConfig {
    ModelConfig {
        dim: 8,
        heads: 2,
        layers: 1,
        ffn_mult: 2,
        vocab_size: 20,
        prediction,
        loss,
        scale_per_head: false,
        seed,
    }
}

/// Three sessions of different lengths so padding and masking are exercised.
pub fn tiny_batch() -> Batch {
    Batch::from_sessions(&[
        Session::new(vec![3, 17, 5, 9, 12], 4),
        Session::new(vec![8, 2], 20),
        Session::new(vec![11, 11, 1], 7),
    ])
}

/// Loss plus `(l2/2)·‖θ‖²` over every trainable scalar.
pub fn objective(cfg: &ModelConfig, params: &ModelParams<f64>, batch: &Batch, l2: f64) -> Result<f64> {
    let (scores, _) = forward(cfg, params, batch)?;
    let cols: Vec<usize> = batch.labels.iter().map(|&l| l - 1).collect();
    let (loss, _) = batch_loss_and_grad(&scores, &cols, cfg.loss);
    let d = params.embed.cols();
    let sq: f64 = params
        .tensors()
        .into_iter()
        .map(|(name, m)| {
            let skip = if name == "embed" { d } else { 0 };
            m.as_slice()[skip..].iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    Ok(loss + 0.5 * l2 * sq)
}

/// Test hook: perturbs the analytic gradient so the suite must fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    /// Index into the checkpoint tensor order.
    pub tensor: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub prediction: String,
    pub loss: String,
    pub l2: f64,
    pub tensor: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub eps: f64,
    pub tolerance: f64,
    pub checks: Vec<TensorCheck>,
    pub passed: bool,
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<5} {:<8} l2={:<6} {:<12} n={:<4} max_rel_err={:.3e} {}",
                c.prediction,
                c.loss,
                c.l2,
                c.tensor,
                c.checked,
                c.max_rel_err,
                if c.passed { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "gradcheck {} (eps {:e}, tolerance {:e})",
            if self.passed { "passed" } else { "FAILED" },
            self.eps,
            self.tolerance
        )
    }
}

/// Checks every trainable scalar of one configuration. The padding row is
/// not trainable and is skipped.
pub fn check_config(
    cfg: &ModelConfig,
    batch: &Batch,
    l2: f64,
    corrupt: Option<Corruption>,
) -> Result<Vec<TensorCheck>> {
    let mut params = init_params::<f64>(cfg)?;
    params.for_each_mut(|m| m.scale(GRADCHECK_PARAM_SCALE));
    let (_, cache) = forward(cfg, &params, batch)?;
    let (_, mut grads) = backward(cfg, &params, &cache, &batch.labels)?;
    l2_penalty(&params, &mut grads, l2);
    if let Some(c) = corrupt {
        if let Some(m) = grads.tensors_mut().into_iter().nth(c.tensor) {
            m.scale(c.factor);
        }
    }

    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(_, m)| m.as_slice().to_vec()).collect();
    let d = params.embed.cols();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(names.len());
    for (t, name) in names.iter().enumerate() {
        let start = if t == 0 { d } else { 0 };
        let n = analytic[t].len();
        let mut worst = 0.0f64;
        for (i, &a) in analytic[t].iter().enumerate().skip(start) {
            let orig = probe.tensors_mut()[t].as_slice()[i];
            probe.tensors_mut()[t].as_mut_slice()[i] = orig + GRADCHECK_EPS;
            let plus = objective(cfg, &probe, batch, l2)?;
            probe.tensors_mut()[t].as_mut_slice()[i] = orig - GRADCHECK_EPS;
            let minus = objective(cfg, &probe, batch, l2)?;
            probe.tensors_mut()[t].as_mut_slice()[i] = orig;
            let numeric = (plus - minus) / (2.0 * GRADCHECK_EPS);
            let err = relative_error(a, numeric);
            if !err.is_finite() {
                return Err(Error::Gradcheck(format!("{name}[{i}]: non-finite gradient")));
            }
            worst = worst.max(err);
        }
        out.push(TensorCheck {
            prediction: cfg.prediction.to_string(),
            loss: cfg.loss.to_string(),
            l2,
            tensor: name.clone(),
            checked: n - start,
            max_rel_err: worst,
            passed: worst <= GRADCHECK_TOL,
        });
    }
    Ok(out)
}

/// Both prediction modes × both loss modes, without and with an L2 term.
pub fn run_suite(seed: u64, corrupt: Option<Corruption>) -> Result<GradcheckReport> {
    let batch = tiny_batch();
    let mut checks = Vec::new();
    for prediction in [PredictionMode::LastItem, PredictionMode::SessionEmbedding] {
        for loss in [LossMode::CategoricalCe, LossMode::Literal] {
            for l2 in [0.0, 1e-2] {
                let cfg = tiny_config(prediction, loss, seed);
                checks.extend(check_config(&cfg, &batch, l2, corrupt)?);
            }
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradcheckReport {
        eps: GRADCHECK_EPS,
        tolerance: GRADCHECK_TOL,
        checks,
        passed,
    })
}

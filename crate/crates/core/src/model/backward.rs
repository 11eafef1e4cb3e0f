use super::config::ModelConfig;
use super::forward::{ForwardCache, LayerCache, RowCache};
use super::params::{Gradients, LayerParams, ModelParams};
use crate::error::{Error, Result};
use crate::loss::batch_loss_and_grad;
use crate::nncore::{matmul_grads, matmul_nt, matmul_tn, relu_grad, softmax_grad, MaskVector, Matrix, Real};

/// Reverse pass through one self-attention block. Accumulates weight
/// gradients into `grads` and returns the gradient w.r.t. the block input.
fn layer_backward<T: Real>(
    cfg: &ModelConfig,
    lp: &LayerParams<T>,
    cache: &LayerCache<T>,
    d_out: &Matrix<T>,
    mask: &MaskVector,
    grads: &mut LayerParams<T>,
) -> Result<Matrix<T>> {
    // H = relu(F·W1 + b1)·W2 + b2 + F
    let (d_hidden, d_w2) = matmul_grads(&cache.hidden, &lp.w2, d_out)?;
    grads.w2.add_assign(&d_w2)?;
    grads.b2.add_assign(&d_out.col_sums())?;
    let d_pre = relu_grad(&cache.pre_act, &d_hidden)?;
    let (d_mixed_ffn, d_w1) = matmul_grads(&cache.mixed, &lp.w1, &d_pre)?;
    grads.w1.add_assign(&d_w1)?;
    grads.b1.add_assign(&d_pre.col_sums())?;
    let mut d_mixed = d_out.clone();
    d_mixed.add_assign(&d_mixed_ffn)?;

    // F = Concat(heads)·Wo + X
    let (d_concat, d_wo) = matmul_grads(&cache.concat, &lp.wo, &d_mixed)?;
    grads.wo.add_assign(&d_wo)?;
    let mut d_input = d_mixed;

    let n = cache.input.rows();
    let dh = cfg.head_dim();
    let inv_scale = T::one() / T::lit(cfg.attention_scale());
    let mut d_q = Matrix::zeros(n, cfg.dim);
    let mut d_k = Matrix::zeros(n, cfg.dim);
    let mut d_v = Matrix::zeros(n, cfg.dim);
    for (h, probs) in cache.probs.iter().enumerate() {
        let start = h * dh;
        let d_head = d_concat.col_slice(start, dh);
        let v = cache.v.col_slice(start, dh);
        let (d_probs, d_vh) = matmul_grads(probs, &v, &d_head)?;
        let mut d_logits = softmax_grad(probs, &d_probs, mask)?;
        d_logits.scale(inv_scale);
        let q = cache.q.col_slice(start, dh);
        let k = cache.k.col_slice(start, dh);
        // logits = Q·Kᵀ
        let (d_qh, d_kt) = matmul_grads(&q, &k.transpose(), &d_logits)?;
        d_q.set_col_slice(start, &d_qh);
        d_k.set_col_slice(start, &d_kt.transpose());
        d_v.set_col_slice(start, &d_vh);
    }
    let x = &cache.input;
    grads.wq.add_assign(&matmul_tn(x, &d_q)?)?;
    grads.wk.add_assign(&matmul_tn(x, &d_k)?)?;
    grads.wv.add_assign(&matmul_tn(x, &d_v)?)?;
    d_input.add_assign(&matmul_nt(&d_q, &lp.wq)?)?;
    d_input.add_assign(&matmul_nt(&d_k, &lp.wk)?)?;
    d_input.add_assign(&matmul_nt(&d_v, &lp.wv)?)?;
    Ok(d_input)
}

/// Gradient of the prediction layer; returns the gradient w.r.t. the
/// final-layer latent matrix `H` of the session.
fn prediction_backward<T: Real>(
    params: &ModelParams<T>,
    row: &RowCache<T>,
    d_scores: &[T],
    grads: &mut Gradients<T>,
) -> Result<Matrix<T>> {
    let d = params.embed.cols();
    let query = row.query();
    let mut d_query = vec![T::zero(); d];
    for (j, &g) in d_scores.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        let e = params.embed.row(j + 1);
        for (dq, &ev) in d_query.iter_mut().zip(e) {
            *dq += g * ev;
        }
        for (de, &qv) in grads.embed.row_mut(j + 1).iter_mut().zip(query) {
            *de += g * qv;
        }
    }

    let h = row.final_output();
    let mut d_h = Matrix::zeros(h.rows(), d);
    let last = row.len - 1;
    let Some(sc) = &row.se else {
        for (o, &g) in d_h.row_mut(last).iter_mut().zip(&d_query) {
            *o += g;
        }
        return Ok(d_h);
    };
    let se = params
        .se
        .as_ref()
        .ok_or_else(|| Error::Config("missing session-embedding weights".into()))?;
    let gse = grads.se.as_mut().expect("gradient layout mirrors params");

    // s = [s_g ; h_n]·W3
    let mut joined = sc.global.clone();
    joined.extend_from_slice(&row.last);
    let d_query_m = Matrix::row_vector(&d_query);
    let (d_joined, d_w3) = matmul_grads(&Matrix::row_vector(&joined), &se.w3, &d_query_m)?;
    gse.w3.add_assign(&d_w3)?;
    let d_global = &d_joined.as_slice()[..d];
    let mut d_last = d_joined.as_slice()[d..].to_vec();

    // s_g = Σⱼ αⱼ hⱼ,  αⱼ = qᵀσ(hⱼ·Wg1 + h_n·Wg2 + c)
    let mut d_gate_pre = Matrix::zeros(row.len, d);
    for j in 0..row.len {
        let hj = h.row(j);
        let d_alpha = crate::nncore::dot(d_global, hj);
        let alpha = sc.alpha[j];
        for (o, &g) in d_h.row_mut(j).iter_mut().zip(d_global) {
            *o += alpha * g;
        }
        let gates = sc.gates.row(j);
        for (k, (du, &gk)) in d_gate_pre.row_mut(j).iter_mut().zip(gates).enumerate() {
            gse.q.as_mut_slice()[k] += d_alpha * gk;
            *du = d_alpha * se.q.as_slice()[k] * gk * (T::one() - gk);
        }
    }
    let valid = Matrix::from_vec(row.len, d, h.as_slice()[..row.len * d].to_vec())?;
    let (d_valid, d_wg1) = matmul_grads(&valid, &se.wg1, &d_gate_pre)?;
    gse.wg1.add_assign(&d_wg1)?;
    let d_pre_sum = d_gate_pre.col_sums();
    gse.c.add_assign(&d_pre_sum)?;
    let (d_last_gate, d_wg2) = matmul_grads(&Matrix::row_vector(&row.last), &se.wg2, &d_pre_sum)?;
    gse.wg2.add_assign(&d_wg2)?;
    for (o, &g) in d_last.iter_mut().zip(d_last_gate.as_slice()) {
        *o += g;
    }
    for j in 0..row.len {
        for (o, &g) in d_h.row_mut(j).iter_mut().zip(d_valid.row(j)) {
            *o += g;
        }
    }
    for (o, &g) in d_h.row_mut(last).iter_mut().zip(&d_last) {
        *o += g;
    }
    Ok(d_h)
}

/// Backpropagates an upstream gradient on the score matrix into every
/// trainable tensor. The padding row of the embedding gradient is zero.
pub fn backward_from_scores<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    d_scores: &Matrix<T>,
) -> Result<Gradients<T>> {
    assert_eq!(d_scores.rows(), cache.rows.len(), "one gradient row per session");
    let mut grads = params.zeros_like();
    for (r, row) in cache.rows.iter().enumerate() {
        let mut d_x = prediction_backward(params, row, d_scores.row(r), &mut grads)?;
        for (l, lc) in row.layers.iter().enumerate().rev() {
            d_x = layer_backward(
                cfg,
                &params.layers[l],
                lc,
                &d_x,
                &row.mask,
                &mut grads.layers[l],
            )?;
        }
        for (p, &idx) in row.indices.iter().enumerate().take(row.len) {
            for (o, &g) in grads.embed.row_mut(idx).iter_mut().zip(d_x.row(p)) {
                *o += g;
            }
        }
    }
    grads.zero_padding_row();
    Ok(grads)
}

/// Mean batch loss under the configured loss mode and its exact gradient.
///
/// `targets` are item indices (1-based).
pub fn backward<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
    targets: &[usize],
) -> Result<(T, Gradients<T>)> {
    let mut scores = Matrix::zeros(cache.rows.len(), cfg.vocab_size);
    for (r, row) in cache.rows.iter().enumerate() {
        scores
            .row_mut(r)
            .copy_from_slice(&super::forward::score_candidates(params, row.query()));
    }
    let cols = targets
        .iter()
        .map(|&t| {
            if t == 0 || t > cfg.vocab_size {
                Err(Error::IndexOutOfRange {
                    index: t,
                    vocab_size: cfg.vocab_size,
                })
            } else {
                Ok(t - 1)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (loss, d_scores) = batch_loss_and_grad(&scores, &cols, cfg.loss);
    let grads = backward_from_scores(cfg, params, cache, &d_scores)?;
    Ok((loss, grads))
}

use super::config::{ModelConfig, PredictionMode};
use super::params::{LayerParams, ModelParams, SessionEmbeddingParams};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nncore::{dot, masked_row_softmax, matmul, matmul_nt, relu, row_softmax, MaskVector, Matrix, Real};

/// Activations of one self-attention block for one session.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub input: Matrix<T>,
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub v: Matrix<T>,
    /// Attention probabilities per head, `n x n`.
    pub probs: Vec<Matrix<T>>,
    /// Concatenated head outputs.
    pub concat: Matrix<T>,
    /// `F`: multi-head output plus residual.
    pub mixed: Matrix<T>,
    /// FFN pre-activation `F·W1 + b1`.
    pub pre_act: Matrix<T>,
    pub hidden: Matrix<T>,
    /// `H`.
    pub output: Matrix<T>,
}

#[derive(Debug, Clone)]
pub struct SessionEmbeddingCache<T> {
    /// Logistic gate values, one row per valid position.
    pub gates: Matrix<T>,
    pub alpha: Vec<T>,
    pub global: Vec<T>,
    pub session: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct RowCache<T> {
    pub indices: Vec<usize>,
    pub len: usize,
    pub mask: MaskVector,
    pub layers: Vec<LayerCache<T>>,
    /// Final-layer latent vector at position `len - 1`.
    pub last: Vec<T>,
    pub se: Option<SessionEmbeddingCache<T>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub rows: Vec<RowCache<T>>,
}

impl<T: Real> RowCache<T> {
    /// The vector the candidates were scored against.
    pub fn query(&self) -> &[T] {
        match &self.se {
            Some(se) => &se.session,
            None => &self.last,
        }
    }

    pub fn final_output(&self) -> &Matrix<T> {
        &self.layers.last().expect("at least one layer").output
    }
}

/// Looks up the embedding rows of a (possibly padded) session.
pub fn embed_session<T: Real>(params: &ModelParams<T>, indices: &[usize]) -> Result<Matrix<T>> {
    let vocab = params.embed.rows() - 1;
    let d = params.embed.cols();
    let mut out = Matrix::zeros(indices.len(), d);
    for (p, &idx) in indices.iter().enumerate() {
        if idx > vocab {
            return Err(Error::IndexOutOfRange {
                index: idx,
                vocab_size: vocab,
            });
        }
        out.row_mut(p).copy_from_slice(params.embed.row(idx));
    }
    Ok(out)
}

fn head_attention<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    mask: &MaskVector,
    scale: T,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let mut logits = matmul_nt(q, k)?;
    logits.scale(T::one() / scale);
    let probs = masked_row_softmax(&logits, mask)?;
    let out = matmul(&probs, v)?;
    Ok((probs, out))
}

/// One attention head:
/// `softmax((X·Wqᵢ)(X·Wkᵢ)ᵀ / scale)(X·Wvᵢ)` with masked keys excluded.
pub fn attention_head<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    layer: usize,
    x: &Matrix<T>,
    head: usize,
    mask: &MaskVector,
) -> Result<Matrix<T>> {
    assert!(head < cfg.heads, "head index out of range");
    let lp = &params.layers[layer];
    let dh = cfg.head_dim();
    let start = head * dh;
    let q = matmul(x, &lp.wq.col_slice(start, dh))?;
    let k = matmul(x, &lp.wk.col_slice(start, dh))?;
    let v = matmul(x, &lp.wv.col_slice(start, dh))?;
    let (_, out) = head_attention(&q, &k, &v, mask, T::lit(cfg.attention_scale()))?;
    Ok(out)
}

/// `F = Concat(head₁..head_h)·Wo + X`.
pub fn multi_head<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    layer: usize,
    x: &Matrix<T>,
    mask: &MaskVector,
) -> Result<Matrix<T>> {
    let mut concat = Matrix::zeros(x.rows(), cfg.dim);
    for h in 0..cfg.heads {
        let out = attention_head(cfg, params, layer, x, h, mask)?;
        concat.set_col_slice(h * cfg.head_dim(), &out);
    }
    let mut f = matmul(&concat, &params.layers[layer].wo)?;
    f.add_assign(x)?;
    Ok(f)
}

/// `H = relu(F·W1 + b1)·W2 + b2 + F`.
pub fn ffn_block<T: Real>(params: &ModelParams<T>, layer: usize, f: &Matrix<T>) -> Result<Matrix<T>> {
    let lp = &params.layers[layer];
    let mut pre = matmul(f, &lp.w1)?;
    pre.add_row_broadcast(&lp.b1)?;
    let mut h = matmul(&relu(&pre), &lp.w2)?;
    h.add_row_broadcast(&lp.b2)?;
    h.add_assign(f)?;
    Ok(h)
}

pub(crate) fn layer_forward<T: Real>(
    cfg: &ModelConfig,
    lp: &LayerParams<T>,
    x: Matrix<T>,
    mask: &MaskVector,
) -> Result<LayerCache<T>> {
    let dh = cfg.head_dim();
    let scale = T::lit(cfg.attention_scale());
    let q = matmul(&x, &lp.wq)?;
    let k = matmul(&x, &lp.wk)?;
    let v = matmul(&x, &lp.wv)?;
    let mut probs = Vec::with_capacity(cfg.heads);
    let mut concat = Matrix::zeros(x.rows(), cfg.dim);
    for h in 0..cfg.heads {
        let start = h * dh;
        let (p, out) = head_attention(
            &q.col_slice(start, dh),
            &k.col_slice(start, dh),
            &v.col_slice(start, dh),
            mask,
            scale,
        )?;
        concat.set_col_slice(start, &out);
        probs.push(p);
    }
    let mut mixed = matmul(&concat, &lp.wo)?;
    mixed.add_assign(&x)?;
    let mut pre_act = matmul(&mixed, &lp.w1)?;
    pre_act.add_row_broadcast(&lp.b1)?;
    let hidden = relu(&pre_act);
    let mut output = matmul(&hidden, &lp.w2)?;
    output.add_row_broadcast(&lp.b2)?;
    output.add_assign(&mixed)?;
    Ok(LayerCache {
        input: x,
        q,
        k,
        v,
        probs,
        concat,
        mixed,
        pre_act,
        hidden,
        output,
    })
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub(crate) fn session_embedding_forward<T: Real>(
    se: &SessionEmbeddingParams<T>,
    h: &Matrix<T>,
    len: usize,
) -> Result<SessionEmbeddingCache<T>> {
    let d = h.cols();
    let last = h.row(len - 1);
    let valid = Matrix::from_vec(len, d, h.as_slice()[..len * d].to_vec())?;
    let mut gates = matmul(&valid, &se.wg1)?;
    let mut last_term = matmul(&Matrix::row_vector(last), &se.wg2)?;
    last_term.add_assign(&se.c)?;
    gates.add_row_broadcast(&last_term)?;
    let gates = gates.map(sigmoid);
    let alpha: Vec<T> = (0..len).map(|j| dot(gates.row(j), se.q.as_slice())).collect();
    let mut global = vec![T::zero(); d];
    for (j, &a) in alpha.iter().enumerate() {
        for (g, &x) in global.iter_mut().zip(valid.row(j)) {
            *g += a * x;
        }
    }
    let mut joined = global.clone();
    joined.extend_from_slice(last);
    let session = matmul(&Matrix::row_vector(&joined), &se.w3)?.into_vec();
    Ok(SessionEmbeddingCache {
        gates,
        alpha,
        global,
        session,
    })
}

/// `ẑᵢ = queryᵀ·eᵢ` for every real item `i = 1..=vocab_size`.
pub fn score_candidates<T: Real>(params: &ModelParams<T>, query: &[T]) -> Vec<T> {
    (1..params.embed.rows())
        .map(|i| dot(params.embed.row(i), query))
        .collect()
}

/// Runs one padded session through every layer.
pub fn forward_session<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    indices: &[usize],
    len: usize,
) -> Result<RowCache<T>> {
    if len == 0 || len > indices.len() {
        return Err(Error::Data(format!(
            "session length {len} invalid for {} positions",
            indices.len()
        )));
    }
    let mask = MaskVector::prefix(indices.len(), len);
    let mut x = embed_session(params, indices)?;
    let mut layers = Vec::with_capacity(cfg.layers);
    for lp in &params.layers {
        let cache = layer_forward(cfg, lp, x, &mask)?;
        x = cache.output.clone();
        layers.push(cache);
    }
    let last = x.row(len - 1).to_vec();
    let se = match cfg.prediction {
        PredictionMode::LastItem => None,
        PredictionMode::SessionEmbedding => {
            let sp = params.se.as_ref().ok_or_else(|| {
                Error::Config("session-embedding mode without session-embedding weights".into())
            })?;
            Some(session_embedding_forward(sp, &x, len)?)
        }
    };
    Ok(RowCache {
        indices: indices.to_vec(),
        len,
        mask,
        layers,
        last,
        se,
    })
}

fn check_indices(batch: &Batch, vocab_size: usize) -> Result<()> {
    for r in 0..batch.rows() {
        if batch.lengths[r] == 0 {
            return Err(Error::Data(format!("batch row {r} is empty")));
        }
        if let Some(&bad) = batch.row(r).iter().find(|&&i| i > vocab_size) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                vocab_size,
            });
        }
    }
    Ok(())
}

/// Scores every candidate for every batch row.
///
/// Returns a `batch x vocab_size` score matrix (column `j` is item `j + 1`)
/// and the activations needed by [`super::backward`].
pub fn forward<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    batch: &Batch,
) -> Result<(Matrix<T>, ForwardCache<T>)> {
    check_indices(batch, cfg.vocab_size)?;
    let mut scores = Matrix::zeros(batch.rows(), cfg.vocab_size);
    let mut rows = Vec::with_capacity(batch.rows());
    for r in 0..batch.rows() {
        let row = forward_session(cfg, params, batch.row(r), batch.lengths[r])?;
        scores
            .row_mut(r)
            .copy_from_slice(&score_candidates(params, row.query()));
        rows.push(row);
    }
    Ok((scores, ForwardCache { rows }))
}

/// Output distribution over items.
pub fn predict_probs<T: Real>(scores: &Matrix<T>) -> Matrix<T> {
    row_softmax(scores)
}

/// Scores from the session-embedding prediction layer, recomputed from the
/// cached final-layer latent vectors.
pub fn session_embedding_variant<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    cache: &ForwardCache<T>,
) -> Result<Matrix<T>> {
    let se = match (cfg.prediction, params.se.as_ref()) {
        (PredictionMode::SessionEmbedding, Some(se)) => se,
        _ => {
            return Err(Error::Config(
                "session_embedding_variant requires prediction mode `se`".into(),
            ))
        }
    };
    let mut scores = Matrix::zeros(cache.rows.len(), cfg.vocab_size);
    for (r, row) in cache.rows.iter().enumerate() {
        let sc = session_embedding_forward(se, row.final_output(), row.len)?;
        scores
            .row_mut(r)
            .copy_from_slice(&score_candidates(params, &sc.session));
    }
    Ok(scores)
}

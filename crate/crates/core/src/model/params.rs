use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{ModelConfig, PredictionMode};
use crate::error::{Error, Result};
use crate::nncore::{Matrix, Real};

/// Standard deviation of the Gaussian used for every trainable entry.
pub const INIT_STD: f64 = 0.1;

/// Weights of one self-attention block. Query/key/value projections are
/// stored fused (`d x d`); head `i` reads column block `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    pub wo: Matrix<T>,
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
}

/// Extra prediction-layer weights for the session-embedding variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionEmbeddingParams<T> {
    pub wg1: Matrix<T>,
    pub wg2: Matrix<T>,
    /// `1 x d`
    pub q: Matrix<T>,
    /// `1 x d`
    pub c: Matrix<T>,
    /// `2d x d`
    pub w3: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// `(vocab_size + 1) x d`, row 0 is the padding item and stays zero.
    pub embed: Matrix<T>,
    pub layers: Vec<LayerParams<T>>,
    pub se: Option<SessionEmbeddingParams<T>>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = ModelParams<T>;

impl<T: Real> LayerParams<T> {
    fn zeros(cfg: &ModelConfig) -> Self {
        let (d, f) = (cfg.dim, cfg.ffn_dim());
        Self {
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            w1: Matrix::zeros(d, f),
            b1: Matrix::zeros(1, f),
            w2: Matrix::zeros(f, d),
            b2: Matrix::zeros(1, d),
        }
    }
}

impl<T: Real> SessionEmbeddingParams<T> {
    fn zeros(d: usize) -> Self {
        Self {
            wg1: Matrix::zeros(d, d),
            wg2: Matrix::zeros(d, d),
            q: Matrix::zeros(1, d),
            c: Matrix::zeros(1, d),
            w3: Matrix::zeros(2 * d, d),
        }
    }
}

impl<T: Real> ModelParams<T> {
    /// All-zero parameters (and the gradient accumulator layout).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            embed: Matrix::zeros(cfg.vocab_size + 1, cfg.dim),
            layers: (0..cfg.layers).map(|_| LayerParams::zeros(cfg)).collect(),
            se: (cfg.prediction == PredictionMode::SessionEmbedding)
                .then(|| SessionEmbeddingParams::zeros(cfg.dim)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|m| m.fill(T::zero()));
        z
    }

    /// Named tensors in checkpoint order: embed, per-layer
    /// wq, wk, wv, wo, w1, b1, w2, b2, then the session-embedding tensors.
    pub fn tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = vec![("embed".to_string(), &self.embed)];
        for (i, l) in self.layers.iter().enumerate() {
            for (name, m) in [
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("w1", &l.w1),
                ("b1", &l.b1),
                ("w2", &l.w2),
                ("b2", &l.b2),
            ] {
                out.push((format!("layer{i}.{name}"), m));
            }
        }
        if let Some(se) = &self.se {
            for (name, m) in [
                ("wg1", &se.wg1),
                ("wg2", &se.wg2),
                ("q", &se.q),
                ("c", &se.c),
                ("w3", &se.w3),
            ] {
                out.push((format!("se.{name}"), m));
            }
        }
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out = vec![&mut self.embed];
        for l in &mut self.layers {
            out.extend([
                &mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.w1, &mut l.b1, &mut l.w2,
                &mut l.b2,
            ]);
        }
        if let Some(se) = &mut self.se {
            out.extend([&mut se.wg1, &mut se.wg2, &mut se.q, &mut se.c, &mut se.w3]);
        }
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut Matrix<T>)) {
        for m in self.tensors_mut() {
            f(m);
        }
    }

    /// Zeroes the padding row of the embedding table.
    pub fn zero_padding_row(&mut self) {
        self.embed.row_mut(0).fill(T::zero());
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.all_finite())
    }

    /// Replaces tensors in checkpoint order, checking every shape.
    pub fn load_tensors(cfg: &ModelConfig, tensors: Vec<Matrix<T>>) -> Result<Self> {
        let mut params = Self::zeros(cfg);
        let expected = params.tensors().len();
        if tensors.len() != expected {
            return Err(Error::Checkpoint(format!(
                "expected {expected} tensors, found {}",
                tensors.len()
            )));
        }
        for (slot, t) in params.tensors_mut().into_iter().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor shape {:?} does not match config shape {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        Ok(params)
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            embed: self.embed.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: l.wq.cast(),
                    wk: l.wk.cast(),
                    wv: l.wv.cast(),
                    wo: l.wo.cast(),
                    w1: l.w1.cast(),
                    b1: l.b1.cast(),
                    w2: l.w2.cast(),
                    b2: l.b2.cast(),
                })
                .collect(),
            se: self.se.as_ref().map(|s| SessionEmbeddingParams {
                wg1: s.wg1.cast(),
                wg2: s.wg2.cast(),
                q: s.q.cast(),
                c: s.c.cast(),
                w3: s.w3.cast(),
            }),
        }
    }
}

/// Draws every trainable entry i.i.d. from `N(0, 0.1²)` using the config
/// seed, in checkpoint tensor order, then zeroes the padding row.
pub fn init_params<T: Real>(cfg: &ModelConfig) -> Result<ModelParams<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut params = ModelParams::zeros(cfg);
    params.for_each_mut(|m| {
        for x in m.as_mut_slice() {
            *x = T::lit(normal.sample(&mut rng));
        }
    });
    params.zero_padding_row();
    Ok(params)
}

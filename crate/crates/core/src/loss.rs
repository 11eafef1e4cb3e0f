//! Training objectives over the softmax output distribution.

use serde::{Deserialize, Serialize};

use crate::nncore::{row_softmax, Matrix, Real};

/// Lower/upper clamp applied to every log argument.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LossMode {
    /// `−Σᵢ [yᵢ log ŷᵢ + (1−yᵢ) log(1−ŷᵢ)]` summed over every item.
    #[serde(rename = "literal")]
    Literal,
    /// `−log ŷ_target`.
    #[default]
    #[serde(rename = "ce")]
    CategoricalCe,
}

impl std::str::FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(LossMode::Literal),
            "ce" => Ok(LossMode::CategoricalCe),
            other => Err(format!("unknown loss mode {other:?} (expected literal|ce)")),
        }
    }
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossMode::Literal => "literal",
            LossMode::CategoricalCe => "ce",
        })
    }
}

#[inline]
fn clamp<T: Real>(p: T) -> T {
    if p.is_nan() {
        return p;
    }
    let lo = T::lit(LOG_CLAMP);
    let hi = T::lit(1.0 - LOG_CLAMP);
    p.max(lo).min(hi)
}

#[inline]
fn in_range<T: Real>(p: T) -> bool {
    p >= T::lit(LOG_CLAMP) && p <= T::lit(1.0 - LOG_CLAMP)
}

/// Loss of one probability row against a target column.
pub fn loss<T: Real>(probs: &[T], target: usize, mode: LossMode) -> T {
    match mode {
        LossMode::CategoricalCe => -clamp(probs[target]).ln(),
        LossMode::Literal => {
            let mut total = T::zero();
            for (i, &p) in probs.iter().enumerate() {
                total -= if i == target {
                    clamp(p).ln()
                } else {
                    clamp(T::one() - p).ln()
                };
            }
            total
        }
    }
}

/// Mean loss over a batch of score rows and its gradient w.r.t. the scores.
///
/// `targets` are score columns (item index − 1).
pub fn batch_loss_and_grad<T: Real>(
    scores: &Matrix<T>,
    targets: &[usize],
    mode: LossMode,
) -> (T, Matrix<T>) {
    assert_eq!(scores.rows(), targets.len(), "one target per score row");
    let probs = row_softmax(scores);
    let batch = T::lit(scores.rows() as f64);
    let mut grad = Matrix::zeros(scores.rows(), scores.cols());
    let mut total = T::zero();
    for (r, &t) in targets.iter().enumerate() {
        let p = probs.row(r);
        total += loss(p, t, mode);
        let g = grad.row_mut(r);
        match mode {
            LossMode::CategoricalCe => {
                g.copy_from_slice(p);
                g[t] -= T::one();
            }
            LossMode::Literal => {
                // dL/dp, then back through the softmax
                let mut dp = vec![T::zero(); p.len()];
                for (i, (d, &pi)) in dp.iter_mut().zip(p).enumerate() {
                    if i == t {
                        if in_range(pi) {
                            *d = -T::one() / pi;
                        }
                    } else {
                        let q = T::one() - pi;
                        if in_range(q) {
                            *d = T::one() / q;
                        }
                    }
                }
                let inner = dp.iter().zip(p).fold(T::zero(), |a, (&d, &pi)| a + d * pi);
                for ((gi, &d), &pi) in g.iter_mut().zip(&dp).zip(p) {
                    *gi = pi * (d - inner);
                }
            }
        }
        g.iter_mut().for_each(|x| *x /= batch);
    }
    (total / batch, grad)
}

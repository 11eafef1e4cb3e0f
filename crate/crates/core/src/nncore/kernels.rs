use super::matrix::{MaskVector, Matrix, Real};
use crate::error::NnError;

/// Additive logit penalty for masked key positions.
pub const MASK_FILL: f64 = -1e9;

fn shape_err<T: Real>(op: &'static str, a: &Matrix<T>, b: &Matrix<T>) -> NnError {
    NnError::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

/// `a × b`.
pub fn matmul<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NnError> {
    if a.cols() != b.rows() {
        return Err(shape_err("matmul", a, b));
    }
    let (n, m) = (a.rows(), b.cols());
    let mut out = Matrix::zeros(n, m);
    let bs = b.as_slice();
    for i in 0..n {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (k, &aik) in arow.iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            let brow = &bs[k * m..(k + 1) * m];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ × b` without materializing the transpose.
pub fn matmul_tn<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NnError> {
    if a.rows() != b.rows() {
        return Err(shape_err("matmul_tn", a, b));
    }
    let (n, m) = (a.cols(), b.cols());
    let mut out = Matrix::zeros(n, m);
    for r in 0..a.rows() {
        let arow = a.row(r);
        let brow = b.row(r);
        for (i, &ari) in arow.iter().enumerate() {
            if ari == T::zero() {
                continue;
            }
            for (o, &brj) in out.row_mut(i).iter_mut().zip(brow) {
                *o += ari * brj;
            }
        }
    }
    Ok(out)
}

/// `a × bᵀ` without materializing the transpose.
pub fn matmul_nt<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, NnError> {
    if a.cols() != b.cols() {
        return Err(shape_err("matmul_nt", a, b));
    }
    let (n, m) = (a.rows(), b.rows());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            out[(i, j)] = dot(arow, b.row(j));
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Gradients of `a × b` given the upstream gradient of the product:
/// `(upstream × bᵀ, aᵀ × upstream)`.
pub fn matmul_grads<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    upstream: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>), NnError> {
    if a.cols() != b.rows() {
        return Err(shape_err("matmul_grads", a, b));
    }
    if upstream.shape() != (a.rows(), b.cols()) {
        return Err(NnError::Shape {
            op: "matmul_grads",
            lhs: (a.rows(), b.cols()),
            rhs: upstream.shape(),
        });
    }
    Ok((matmul_nt(upstream, b)?, matmul_tn(a, upstream)?))
}

/// Row-wise softmax over the key columns, with masked columns pushed to
/// exactly zero weight.
pub fn masked_row_softmax<T: Real>(
    logits: &Matrix<T>,
    mask: &MaskVector,
) -> Result<Matrix<T>, NnError> {
    if mask.len() != logits.cols() {
        return Err(NnError::Shape {
            op: "masked_row_softmax",
            lhs: logits.shape(),
            rhs: (1, mask.len()),
        });
    }
    if logits.rows() > 0 && mask.valid_count() == 0 {
        return Err(NnError::DegenerateRow { row: 0 });
    }
    let fill = T::lit(MASK_FILL);
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let src = logits.row(r);
        let dst = out.row_mut(r);
        let mut max = T::neg_infinity();
        for (j, (d, &x)) in dst.iter_mut().zip(src).enumerate() {
            *d = if mask.is_valid(j) { x } else { x + fill };
            max = max.max(*d);
        }
        let mut sum = T::zero();
        for d in dst.iter_mut() {
            *d = (*d - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    Ok(out)
}

/// Unmasked row softmax, used for the output distribution over items.
pub fn row_softmax<T: Real>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Backward of [`masked_row_softmax`]: `p ⊙ (u − ⟨u, p⟩)` over valid
/// positions, zero at masked ones.
pub fn softmax_grad<T: Real>(
    probs: &Matrix<T>,
    upstream: &Matrix<T>,
    mask: &MaskVector,
) -> Result<Matrix<T>, NnError> {
    if probs.shape() != upstream.shape() {
        return Err(shape_err("softmax_grad", probs, upstream));
    }
    if mask.len() != probs.cols() {
        return Err(NnError::Shape {
            op: "softmax_grad",
            lhs: probs.shape(),
            rhs: (1, mask.len()),
        });
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        let p = probs.row(r);
        let u = upstream.row(r);
        let inner = (0..p.len())
            .filter(|&j| mask.is_valid(j))
            .fold(T::zero(), |acc, j| acc + u[j] * p[j]);
        for (j, g) in out.row_mut(r).iter_mut().enumerate() {
            if mask.is_valid(j) {
                *g = p[j] * (u[j] - inner);
            }
        }
    }
    Ok(out)
}

pub fn relu<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Upstream where `x > 0`, else zero (the kink at 0 gets 0).
pub fn relu_grad<T: Real>(x: &Matrix<T>, upstream: &Matrix<T>) -> Result<Matrix<T>, NnError> {
    if x.shape() != upstream.shape() {
        return Err(shape_err("relu_grad", x, upstream));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(upstream.as_slice())
        .map(|(&xv, &u)| if xv > T::zero() { u } else { T::zero() })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

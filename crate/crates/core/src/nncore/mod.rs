//! Dense row-major kernels and their analytic gradients.
//!
//! Only what the attention graph needs: matrix products, masked softmax,
//! ReLU, and the matching backward passes. All kernels are pure functions.

mod kernels;
mod matrix;

pub use kernels::{
    masked_row_softmax, matmul, matmul_grads, matmul_nt, matmul_tn, relu, relu_grad,
    row_softmax, softmax_grad, MASK_FILL,
};
pub(crate) use kernels::dot;
pub use matrix::{MaskVector, Matrix, Real};

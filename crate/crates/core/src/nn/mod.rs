//! Dense-network numerics: tensors, layers, Adam and gradient checking.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod layer;
mod loss;
mod mlp;
mod real;
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use layer::{dense_backward, dense_forward, Activation, DenseLayer};
pub(crate) use layer::batch_rows;
pub use loss::{mse_and_grad, softmax_cross_entropy};
pub use mlp::{Mlp, Trace};
pub use real::Real;
pub use tensor::{dot, matmul_nn, matmul_nt, matmul_tn_acc, Tensor};

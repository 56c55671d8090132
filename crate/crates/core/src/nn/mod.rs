//! Dense tensors and the handful of kernels a fully convolutional
//! classifier needs, each with an exact analytic backward pass.

mod adam;
mod conv;
mod init;
mod ops;
mod rng;
mod scalar;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_backward_params, conv2d_forward, ConvGrads};
pub(crate) use conv::{conv_image_backward, conv_image_forward, flip_kernel, ConvShape};
pub use init::glorot_uniform_init;
pub use ops::{
    dropout, dropout_backward, global_average_pool, global_average_pool_backward, relu,
    relu_backward, softmax, softmax_cross_entropy, Extent, LossOutput,
};
pub use rng::Rng;
pub use scalar::Scalar;
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sample {sample} has an empty or out-of-range valid region")]
    EmptyValidRegion { sample: usize },
}

impl NnError {
    pub fn name(&self) -> &'static str {
        match self {
            NnError::ShapeMismatch(_) => "ShapeMismatch",
            NnError::EmptyValidRegion { .. } => "EmptyValidRegion",
        }
    }
}

pub(crate) fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::ShapeMismatch(msg.into())
}

//! The three-layer fully convolutional classifier and its file format.

mod fcn;
mod persist;

use thiserror::Error;

use crate::nn::NnError;

pub use fcn::{
    build_fcn, fcn_backward, fcn_forward, fcn_loss_and_grads, min_input_shape, Classifier,
    ConvSpec, FcnConfig, FcnModel, FcnParams, ForwardCache, Prediction, PARAM_NAMES,
};
pub use persist::{load_model, load_model_file, save_model, save_model_file, MODEL_MAGIC, MODEL_VERSION};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input {h}x{w} is below the minimum {min_h}x{min_w}")]
    InputBelowMinimum {
        h: usize,
        w: usize,
        min_h: usize,
        min_w: usize,
    },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated: {0}")]
    TruncatedPayload(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("bad model header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub fn name(&self) -> &'static str {
        match self {
            ModelError::InvalidConfig(_) => "InvalidConfig",
            ModelError::InputBelowMinimum { .. } => "InputBelowMinimum",
            ModelError::BadMagic => "BadMagic",
            ModelError::UnsupportedVersion(_) => "UnsupportedVersion",
            ModelError::TruncatedPayload(_) => "TruncatedPayload",
            ModelError::ChecksumMismatch { .. } => "ChecksumMismatch",
            ModelError::BadHeader(_) => "BadHeader",
            ModelError::Nn(e) => e.name(),
            ModelError::Io(_) => "Io",
        }
    }
}

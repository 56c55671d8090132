//! Training with Adam and early stopping, evaluation, and Monte Carlo
//! cross-validation.

mod cv;
mod eval;
mod fit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BatchMode, DatasetError};
use crate::dsp::Descriptor;
use crate::model::ModelError;
use crate::nn::AdamConfig;

pub use cv::{cross_validate, render_summary_table, CvOptions, CvOutcome, CvSummary, FoldResult};
pub use eval::{evaluate, ConfusionMatrix, Evaluation};
pub use fit::{train, EpochRecord, TrainReport};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("bad report file: {0}")]
    BadReport(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl TrainError {
    pub fn name(&self) -> &'static str {
        match self {
            TrainError::DatasetTooSmall(_) => "DatasetTooSmall",
            TrainError::NonFiniteLoss { .. } => "NonFiniteLoss",
            TrainError::InvalidConfig(_) => "InvalidConfig",
            TrainError::BadReport(_) => "BadReport",
            TrainError::Model(e) => e.name(),
            TrainError::Dataset(e) => e.name(),
            TrainError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopping {
    /// Epochs without a `min_delta` improvement in validation loss before
    /// training stops.
    pub patience: usize,
    pub min_delta: f64,
    /// Return the weights of the epoch with the lowest validation loss.
    pub restore_best: bool,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        Self {
            patience: 50,
            min_delta: 1e-4,
            restore_best: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub early_stop: EarlyStopping,
    pub val_fraction: f64,
    pub seed: u64,
    pub descriptor: Descriptor,
    pub batch_mode: BatchMode,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 10_000,
            batch_size: 80,
            early_stop: EarlyStopping::default(),
            val_fraction: 0.1,
            seed: 0,
            descriptor: Descriptor::Mfcc,
            batch_mode: BatchMode::PadMask,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must be in (0, 1)");
        }
        if self.early_stop.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        Ok(())
    }
}

use thiserror::Error;

use crate::audio::AudioError;
use crate::dataset::DatasetError;
use crate::dsp::DspError;
use crate::model::ModelError;
use crate::nn::NnError;
use crate::train::TrainError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error: one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Qualified error name, e.g. `audio_io::MalformedContainer`.
    pub fn name(&self) -> String {
        match self {
            Error::Audio(e) => format!("audio_io::{}", e.name()),
            Error::Dsp(e) => format!("dsp::{}", e.name()),
            Error::Nn(e) => format!("nn_core::{}", e.name()),
            Error::Model(e) => format!("fcn_model::{}", e.name()),
            Error::Dataset(e) => format!("dataset::{}", e.name()),
            Error::Train(e) => format!("train_eval::{}", e.name()),
            Error::Io(_) => "io::Io".to_string(),
        }
    }
}
